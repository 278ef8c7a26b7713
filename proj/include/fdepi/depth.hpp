#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdepi/dataset.hpp"

namespace fdepi {

// Band counts behind the modified band depth: for curve i, the number of
// (pair, day) combinations with min(y_j, y_k) <= y_i <= max(y_j, y_k) over
// all pairs j < k of the n curves (pairs containing i included).
std::vector<long long> band_counts(const Eigen::MatrixXd& values);

// Modified band depth: band count / (C(n, 2) * T). Needs n >= 3.
std::vector<double> modified_band_depth(const FunctionalDataset& data);

struct DepthReport {
    std::vector<std::string> names;
    std::vector<double> depths;
    // Curves ordered from deepest to least deep (depth ties by name).
    std::vector<std::size_t> depth_order;
    std::size_t median_index = 0;
    std::vector<std::size_t> central;  // the ceil(n/2) deepest curves
    Eigen::VectorXd central_lower, central_upper;
    Eigen::VectorXd fence_lower, fence_upper;
    std::vector<std::size_t> outliers;  // ascending index order

    // Filled by signed_ranking.
    std::vector<double> above_share;  // share of days above the median curve
    std::vector<int> signs;
    std::vector<double> signed_depths;
    std::vector<std::size_t> ranking;  // rank 1 first
    std::vector<std::string> warnings;

    bool is_outlier(std::size_t i) const;
    bool is_central(std::size_t i) const;
};

// Median, 50% central envelope, fence at 1.5 times the envelope range and
// the curves crossing it anywhere. Needs n >= 4.
DepthReport functional_boxplot(const FunctionalDataset& data);

// functional_boxplot plus the signed ranking: a curve above the median on
// more than half of the days gets sign +1, otherwise -1; curves are ranked
// by sign * (1 - depth), largest first.
DepthReport signed_ranking(const FunctionalDataset& data);

}  // namespace fdepi
