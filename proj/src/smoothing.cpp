#include "fdepi/smoothing.hpp"

#include <cmath>
#include <limits>

#include "fdepi/error.hpp"

namespace fdepi {

namespace {
// Directions with (1 - d) below this are not seen by the data at all.
constexpr double kDataNullTol = 1e-10;
}  // namespace

BSplineBasis build_basis(const TimeGrid& grid) { return BSplineBasis::daily(grid.length()); }

SmoothModel::SmoothModel(BSplineBasis basis, Eigen::MatrixXd penalty, double lambda, Eigen::MatrixXd coefficients,
                         Eigen::VectorXd gcv_per_curve, double edf, TimeGrid grid, std::vector<std::string> names)
    : basis_(std::move(basis)), penalty_(std::move(penalty)), lambda_(lambda),
      coefficients_(std::move(coefficients)), gcv_(std::move(gcv_per_curve)), edf_(edf), grid_(std::move(grid)),
      names_(std::move(names)) {}

double SmoothModel::evaluate(std::size_t curve, double t, int deriv) const {
    return coefficients_.row(static_cast<Eigen::Index>(curve)).dot(basis_.evaluate(t, deriv));
}

FunctionalDataset SmoothModel::fitted() const {
    const Eigen::MatrixXd phi = basis_.evaluate(grid_.abscissae());
    return FunctionalDataset(grid_, names_, coefficients_ * phi.transpose());
}

SmootherSpectrum::SmootherSpectrum(const TimeGrid& grid)
    : basis_(build_basis(grid)), penalty_(basis_.penalty(2)), design_(basis_.evaluate(grid.abscissae())) {
    const Eigen::MatrixXd gram = design_.transpose() * design_ + penalty_;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
        throw NumericalError("fd-core", "smooth", "basis Gram matrix is not positive definite");
    const Eigen::MatrixXd l = llt.matrixL();
    // K = L^{-1} R L^{-T}
    const Eigen::MatrixXd linv_r = llt.matrixL().solve(penalty_);
    const Eigen::MatrixXd k = llt.matrixL().solve(linv_r.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (k + k.transpose()));
    if (eig.info() != Eigen::Success)
        throw NumericalError("fd-core", "smooth", "eigen-decomposition of the penalty failed");
    roughness_ = eig.eigenvalues().cwiseMax(0.0).cwiseMin(1.0);
    data_weight_ = (1.0 - roughness_.array()).matrix();
    to_coef_ = llt.matrixU().solve(eig.eigenvectors());
    projector_ = design_ * to_coef_;
}

Eigen::VectorXd SmootherSpectrum::shrinkage(double lambda) const {
    Eigen::VectorXd g(roughness_.size());
    for (Eigen::Index k = 0; k < g.size(); ++k) {
        const double w = data_weight_(k);
        g(k) = w < kDataNullTol ? 0.0 : 1.0 / (w + lambda * roughness_(k));
    }
    return g;
}

double SmootherSpectrum::trace(double lambda) const {
    const Eigen::VectorXd g = shrinkage(lambda);
    double tr = 0.0;
    for (Eigen::Index k = 0; k < g.size(); ++k) tr += data_weight_(k) * g(k);
    return tr;
}

Eigen::MatrixXd SmootherSpectrum::smoother_matrix(double lambda) const {
    const Eigen::VectorXd g = shrinkage(lambda);
    return projector_ * g.asDiagonal() * projector_.transpose();
}

Eigen::MatrixXd SmootherSpectrum::coefficients(const Eigen::MatrixXd& y, double lambda) const {
    const Eigen::VectorXd g = shrinkage(lambda);
    const Eigen::MatrixXd scores = y * projector_;  // n x B
    return scores * g.asDiagonal() * to_coef_.transpose();
}

namespace {

SmoothModel fit_with(const SmootherSpectrum& spectrum, const FunctionalDataset& data, double lambda) {
    const Eigen::MatrixXd coef = spectrum.coefficients(data.values(), lambda);
    const Eigen::MatrixXd phi = spectrum.basis().evaluate(data.grid().abscissae());
    const Eigen::MatrixXd resid = data.values() - coef * phi.transpose();
    const double t = static_cast<double>(data.length());
    const double edf = spectrum.trace(lambda);
    const double denom = t - edf;
    Eigen::VectorXd gcv(resid.rows());
    for (Eigen::Index i = 0; i < resid.rows(); ++i)
        gcv(i) = denom > 1e-8 * t ? t * resid.row(i).squaredNorm() / (denom * denom)
                                  : std::numeric_limits<double>::quiet_NaN();
    return SmoothModel(spectrum.basis(), spectrum.penalty(), lambda, coef, gcv, edf, data.grid(), data.names());
}

}  // namespace

SmoothModel smooth(const FunctionalDataset& data, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ValidationError("smoothing parameter must be a finite value >= 0, got " + std::to_string(lambda));
    const SmootherSpectrum spectrum(data.grid());
    return fit_with(spectrum, data, lambda);
}

LambdaSelection select_lambda(const FunctionalDataset& data, const std::vector<double>& candidates) {
    if (candidates.empty()) throw ValidationError("lambda grid is empty");
    for (double l : candidates)
        if (!(l >= 0.0) || !std::isfinite(l))
            throw ValidationError("lambda grid values must be finite and >= 0");
    const SmootherSpectrum spectrum(data.grid());
    const double t = static_cast<double>(data.length());
    std::vector<std::string> warnings;
    std::vector<double> scores(candidates.size(), std::numeric_limits<double>::quiet_NaN());
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const double lambda = candidates[c];
        if (t - spectrum.trace(lambda) <= 1e-8 * t) {
            warnings.push_back("lambda " + std::to_string(lambda) +
                               " skipped: effective degrees of freedom reach the grid length");
            continue;
        }
        scores[c] = fit_with(spectrum, data, lambda).gcv_mean();
        if (!best || scores[c] < scores[*best] || (scores[c] == scores[*best] && lambda > candidates[*best]))
            best = c;
    }
    if (!best) throw NumericalError("fd-core", "select_lambda", "every candidate lambda was skipped");
    return LambdaSelection{candidates[*best], fit_with(spectrum, data, candidates[*best]), candidates, scores,
                           std::move(warnings)};
}

std::vector<double> default_lambda_grid() {
    std::vector<double> grid(41);
    for (int i = 0; i < 41; ++i) grid[static_cast<std::size_t>(i)] = std::pow(10.0, -4.0 + 12.0 * i / 40.0);
    return grid;
}

}  // namespace fdepi
