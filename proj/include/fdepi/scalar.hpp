#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fdepi {

// Columns centered and scaled to unit sample sd (n - 1). A constant column is
// an error naming it.
Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& m, const std::vector<std::string>& column_names);

enum class Axis { rows, columns };

// Agglomerative tree in R's hclust layout: merge[k] holds two operands, a
// negative value -(i+1) for leaf i or a positive value s for the cluster made
// at step s (1-based).
struct Dendrogram {
    std::vector<std::string> labels;
    std::vector<std::array<int, 2>> merge;
    std::vector<double> heights;
    std::vector<std::size_t> order;  // leaves left to right
};

// 1 - Pearson correlation between every pair of items (rows of `items`).
Eigen::MatrixXd correlation_distance(const Eigen::MatrixXd& items, const std::vector<std::string>& labels);

// Complete-linkage clustering of the rows or columns of m.
Dendrogram hcluster(const Eigen::MatrixXd& m, Axis axis, const std::vector<std::string>& labels);

// Product over r = 2..m-1 of r^2 / (r^2 - 1), which telescopes to 2(m-1)/m.
double h_margin_correction(std::size_t m);
double h_correction(std::size_t rows, std::size_t cols);
double h_score(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols);
double adjusted_h_score(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows,
                        const std::vector<std::size_t>& cols);

struct Bicluster {
    std::vector<std::size_t> rows;
    std::vector<std::size_t> cols;
    double h_score = 0.0;
    double adjusted_h_score = 0.0;
};

enum class MaskMode { random_normal, column_mean };

struct ChengChurchOptions {
    double delta = 0.1;
    std::size_t max_biclusters = 2;
    double deletion_factor = 1.2;
    // Multiple deletion only runs on a dimension with at least this many nodes.
    std::size_t multiple_deletion_min = 100;
    MaskMode mask = MaskMode::random_normal;
    std::uint64_t seed = 1;
};

// Greedy extraction (multiple deletion, single deletion, addition) under the
// constant-column model, repeated on a copy with found cells masked.
std::vector<Bicluster> cheng_church(const Eigen::MatrixXd& standardized, const ChengChurchOptions& options);

struct DeltaTuning {
    double delta = 0.0;
    double loss = 0.0;  // max |H_adj - target| over the targets, in extraction order
    std::vector<Bicluster> biclusters;
};

// Picks delta from a log-spaced grid on [lo, hi] so the first biclusters'
// adjusted scores are closest to `targets`.
DeltaTuning tune_delta(const Eigen::MatrixXd& standardized, const std::vector<double>& targets,
                       ChengChurchOptions base, double lo = 1e-3, double hi = 1.0, std::size_t points = 400);

struct PcaResult {
    Eigen::MatrixXd loadings;   // p x p, columns are components
    Eigen::MatrixXd scores;     // n x p
    Eigen::VectorXd variances;  // eigenvalues of the correlation matrix
    Eigen::VectorXd explained;  // fractions of the total
};

// PCA on standardized columns; each component's loading on column 0 is made
// non-negative.
PcaResult pca(const Eigen::MatrixXd& m, const std::vector<std::string>& column_names);

// 1 / (1 - R^2_j) regressing column j on the others with an intercept; +inf
// when column j is an exact linear combination of the others.
Eigen::VectorXd vif(const Eigen::MatrixXd& m, const std::vector<std::string>& column_names);

}  // namespace fdepi
