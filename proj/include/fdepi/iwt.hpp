#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "fdepi/dataset.hpp"

namespace fdepi {

struct IwtOptions {
    std::size_t permutations = 1000;
    std::uint64_t seed = 0;
    // Enumerate every relabelling when there are at most this many.
    std::size_t exact_limit = 10000;
    bool force_monte_carlo = false;
    std::size_t threads = 0;
};

struct IntervalTestResult {
    std::size_t length = 0;
    // raw_p(start, len - 1): p-value of the interval [start, start + len).
    // Entries with start + len > T are unused (NaN).
    Eigen::MatrixXd raw_p;
    // adjusted_p(t, w - 1) for day t and scale w in 1..T.
    Eigen::MatrixXd adjusted_p;
    std::size_t n_permutations = 0;  // relabellings drawn, or enumerated when exact
    bool exact = false;
    std::string statistic = "mean";

    double raw(std::size_t start, std::size_t len) const {
        return raw_p(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len - 1));
    }
    double adjusted(std::size_t t, std::size_t scale) const {
        return adjusted_p(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(scale - 1));
    }
};

// Sum over the days of [start, start + len) of |mean_A(t) - mean_B(t)|.
double interval_statistic(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::size_t start, std::size_t len);

// Permutation p-value of one interval.
double interval_p(const FunctionalDataset& a, const FunctionalDataset& b, std::size_t start, std::size_t len,
                  const IwtOptions& options = {});

// p-values of every interval from one shared set of relabellings, and the
// adjusted p-value of day t at scale w: the largest raw p over intervals of
// length <= w that contain t.
IntervalTestResult iwt(const FunctionalDataset& a, const FunctionalDataset& b, const IwtOptions& options = {});

// Number of ways to choose k of n, saturating at limit + 1.
std::size_t binomial_capped(std::size_t n, std::size_t k, std::size_t limit);

}  // namespace fdepi
