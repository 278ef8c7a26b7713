#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdepi/dataset.hpp"

namespace fdepi {

// Functional principal components with the trapezoid inner product:
// eigenfunctions satisfy phi_k' W phi_l = delta_kl.
struct FpcExpansion {
    Eigen::VectorXd mean;
    Eigen::MatrixXd eigenfunctions;  // T x M
    Eigen::MatrixXd scores;          // n x M
    Eigen::VectorXd eigenvalues;     // all T, descending
    Eigen::VectorXd cumulative;      // cumulative explained fractions, all T
    std::size_t components = 0;
};

FpcExpansion fpc(const FunctionalDataset& data, double variance_target = 0.95);

struct GroupNetProblem {
    Eigen::MatrixXd responses;  // n x M (FPC scores)
    Eigen::MatrixXd design;     // n x p, standardized columns
    double alpha = 0.5;
};

double group_net_objective(const GroupNetProblem& problem, const Eigen::MatrixXd& coef, double lambda);
// Largest KKT violation over the groups.
double group_net_kkt(const GroupNetProblem& problem, const Eigen::MatrixXd& coef, double lambda);
double group_net_lambda_max(const GroupNetProblem& problem);

// Block coordinate descent from `start` until the KKT violation is <= tol.
// Objective values after every sweep are appended to `trace` when given.
Eigen::MatrixXd group_net_bcd(const GroupNetProblem& problem, double lambda, const Eigen::MatrixXd& start,
                              double tol = 1e-8, std::vector<double>* trace = nullptr);
// Proximal gradient with a fixed 1/L step; slow, kept as a reference.
Eigen::MatrixXd group_net_proximal(const GroupNetProblem& problem, double lambda, double tol = 1e-12,
                                   std::size_t max_iterations = 2000000);

struct SelectionPath {
    std::vector<std::string> covariates;
    std::vector<double> lambdas;                      // decreasing
    std::vector<Eigen::MatrixXd> coefficients;        // p x M per lambda
    std::vector<std::vector<std::size_t>> active;     // per lambda
    std::vector<std::size_t> entry_order;             // covariates that ever enter, first to last
    std::vector<double> entry_lambda;                 // per entry_order element
};

struct SelectOptions {
    double alpha = 0.5;
    std::size_t path_length = 100;
    double lambda_min_ratio = 1e-3;
    double tolerance = 1e-8;
};

// Throws unless every design column has mean 0 and sample sd 1 (within 1e-6).
void check_standardized(const Eigen::MatrixXd& design, const std::vector<std::string>& covariates);

SelectionPath select(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& design,
                     const std::vector<std::string>& covariates, const SelectOptions& options = {});

// First k covariates by entry order.
std::vector<std::string> top_features(const SelectionPath& path, std::size_t k);

}  // namespace fdepi
