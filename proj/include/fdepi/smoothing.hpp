#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdepi/bspline.hpp"
#include "fdepi/dataset.hpp"

namespace fdepi {

// Cubic basis with a knot at every day of the grid.
BSplineBasis build_basis(const TimeGrid& grid);

// Roughness-penalized regression spline fit shared by all curves of a dataset.
class SmoothModel {
  public:
    SmoothModel(BSplineBasis basis, Eigen::MatrixXd penalty, double lambda, Eigen::MatrixXd coefficients,
                Eigen::VectorXd gcv_per_curve, double edf, TimeGrid grid, std::vector<std::string> names);

    const BSplineBasis& basis() const noexcept { return basis_; }
    const Eigen::MatrixXd& penalty() const noexcept { return penalty_; }
    double lambda() const noexcept { return lambda_; }
    // n x B, one row per curve.
    const Eigen::MatrixXd& coefficients() const noexcept { return coefficients_; }
    const Eigen::VectorXd& gcv_per_curve() const noexcept { return gcv_; }
    double gcv_mean() const noexcept { return gcv_.size() ? gcv_.mean() : 0.0; }
    // Effective degrees of freedom tr(S_lambda).
    double edf() const noexcept { return edf_; }

    // Fitted curve i (or its derivative) at abscissa t.
    double evaluate(std::size_t curve, double t, int deriv = 0) const;
    // Fitted values on the original grid.
    FunctionalDataset fitted() const;

  private:
    BSplineBasis basis_;
    Eigen::MatrixXd penalty_;
    double lambda_;
    Eigen::MatrixXd coefficients_;
    Eigen::VectorXd gcv_;
    double edf_;
    TimeGrid grid_;
    std::vector<std::string> names_;
};

// Spectral form of the penalized smoother for one grid: every lambda is
// handled by rescaling a fixed generalized eigenbasis, which stays
// well-conditioned from lambda = 0 (interpolation) to very large lambda.
class SmootherSpectrum {
  public:
    explicit SmootherSpectrum(const TimeGrid& grid);

    const BSplineBasis& basis() const noexcept { return basis_; }
    const Eigen::MatrixXd& penalty() const noexcept { return penalty_; }

    // Shrinkage factor per eigen-direction at this lambda.
    Eigen::VectorXd shrinkage(double lambda) const;
    // tr(S_lambda).
    double trace(double lambda) const;
    // Explicit smoother matrix (T x T); used by tests and diagnostics.
    Eigen::MatrixXd smoother_matrix(double lambda) const;
    // Basis coefficients (rows = curves) for data rows y.
    Eigen::MatrixXd coefficients(const Eigen::MatrixXd& y, double lambda) const;

  private:
    BSplineBasis basis_;
    Eigen::MatrixXd penalty_;
    Eigen::MatrixXd design_;      // T x B basis evaluations
    Eigen::MatrixXd to_coef_;     // B x B: eigen-directions -> basis coefficients
    Eigen::MatrixXd projector_;   // T x B: data -> eigen-direction scores (transposed)
    Eigen::VectorXd roughness_;   // generalized eigenvalues in [0, 1]
    Eigen::VectorXd data_weight_; // 1 - roughness; ~0 for directions invisible to the data
};

SmoothModel smooth(const FunctionalDataset& data, double lambda);

struct LambdaSelection {
    double lambda;
    SmoothModel model;
    std::vector<double> candidates;
    std::vector<double> mean_gcv;  // NaN where skipped
    std::vector<std::string> warnings;
};

// Candidate with minimal mean GCV across curves; ties go to the larger lambda.
LambdaSelection select_lambda(const FunctionalDataset& data, const std::vector<double>& candidates);

// 41 log-spaced values on [1e-4, 1e8].
std::vector<double> default_lambda_grid();

}  // namespace fdepi
