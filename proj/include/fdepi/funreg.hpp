#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdepi/dataset.hpp"

namespace fdepi {

struct FunctionalTerm {
    std::string name;
    FunctionalDataset values;
};

struct ScalarTerm {
    std::string name;
    Eigen::VectorXd values;
};

// Functional response on functional predictors and scalar covariates. Every
// dataset must share the response's region order. With group labels the model
// carries one intercept curve per group instead of a shared one.
struct FunRegSpec {
    FunctionalDataset response;
    std::vector<FunctionalTerm> functional;
    std::vector<ScalarTerm> scalar;
    std::vector<std::size_t> groups;  // empty = single intercept

    std::size_t group_count() const;
    std::vector<std::string> term_names() const;
    // Same model with the named term dropped.
    FunRegSpec without(const std::string& term) const;
    // Curves in `rows` only (groups follow).
    FunRegSpec subset(const std::vector<std::size_t>& rows) const;
};

struct FunRegOptions {
    std::size_t basis_dimension = 15;
    // Smoothing parameters in term order: (lambda_s, lambda_t) for every
    // functional term, then one lambda per scalar term. Unset = REML.
    std::optional<std::vector<double>> lambdas;
    std::size_t max_evaluations = 4000;
    std::size_t threads = 0;
};

struct FunRegFit {
    std::vector<std::string> functional_names;
    std::vector<std::string> scalar_names;
    std::vector<std::string> region_names;
    std::vector<std::size_t> groups;
    Eigen::MatrixXd intercepts;                // groups x T
    std::vector<Eigen::MatrixXd> surfaces;     // S x T, beta(s, t)
    std::vector<Eigen::MatrixXd> surface_se;
    std::vector<Eigen::VectorXd> curves;       // T, original covariate units
    std::vector<Eigen::VectorXd> curve_se;
    Eigen::MatrixXd fitted;
    Eigen::MatrixXd residuals;
    Eigen::MatrixXd observed;
    std::vector<double> lambdas;
    double sigma2 = 0.0;
    double edf = 0.0;
    double reml = 0.0;
    double r2 = 0.0;

    // Prediction for one new curve: functional predictor curves in term order,
    // scalar covariates in original units, group label.
    Eigen::VectorXd predict(const std::vector<Eigen::VectorXd>& functional,
                            const std::vector<double>& scalar, std::size_t group = 0) const;
    std::size_t scalar_index(const std::string& term) const;
};

FunRegFit fit(const FunRegSpec& spec, const FunRegOptions& options = {});

// SS_reg / (SS_reg + SS_res) with day-integrated sums of squares.
double r_squared(const FunRegFit& fit);
// 1 - SS_pred / SS_tot with every curve predicted by a model fitted without it.
double loocv_r_squared(const FunRegSpec& spec, const FunRegOptions& options = {});
// (R^2 - R^2_red) / (1 - R^2_red), the reduced model refitted without `term`.
double partial_r_squared(const FunRegSpec& spec, const std::string& term,
                         const FunRegOptions& options = {});

// Per day: +1 when the pointwise band lies above zero, -1 below, 0 otherwise.
std::vector<int> effect_sign_bands(const FunRegFit& fit, const std::string& term,
                                   double level = 0.95);

}  // namespace fdepi
