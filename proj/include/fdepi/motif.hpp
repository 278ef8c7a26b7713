#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdepi/dataset.hpp"

namespace fdepi {

// Mean squared difference over the span of the two sampled curves:
// trapezoid integral of (x - v)^2 divided by the span length (c - 1 days).
double l2_distance(const Eigen::Ref<const Eigen::VectorXd>& portion, const Eigen::Ref<const Eigen::VectorXd>& motif);

struct MotifOptions {
    std::size_t clusters = 2;
    std::size_t motif_length = 65;
    std::size_t restarts = 20;
    std::uint64_t seed = 0;
    std::size_t max_iterations = 200;
    double tolerance = 1e-6;  // on |dJ| / J
    bool derivative_distance = false;
    std::size_t threads = 0;
};

struct MotifModel {
    std::size_t clusters = 0;
    std::size_t motif_length = 0;
    std::size_t grid_length = 0;
    std::vector<std::string> names;
    // K x c motifs on the original scale (first differences when the
    // derivative distance was used, in which case they have c - 1 columns).
    Eigen::MatrixXd motifs;
    Eigen::MatrixXd memberships;  // n x K, rows sum to 1
    Eigen::MatrixXi shifts;       // n x K window starts in [0, T - c]
    Eigen::MatrixXd distances;    // n x K distances at the final shifts
    std::vector<double> objective_trace;
    std::vector<std::size_t> hard_labels;
    std::size_t best_restart = 0;
    bool converged = false;
    bool derivative_distance = false;

    double objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
    int shift_of(std::size_t i) const {
        return shifts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(hard_labels[i]));
    }
    // Curves whose hard label is k.
    std::vector<std::size_t> members(std::size_t k) const;
};

// Best of `restarts` runs from Dirichlet(1) memberships and uniform shifts.
// Clusters are numbered by decreasing motif maximum.
MotifModel prob_kma(const FunctionalDataset& data, const MotifOptions& options);

// A single alternating run from the given starting memberships and shifts.
MotifModel prob_kma_from(const FunctionalDataset& data, const MotifOptions& options,
                         const Eigen::MatrixXd& memberships, const Eigen::MatrixXi& shifts);

// J for arbitrary motifs, memberships and shifts (derivative distance honoured).
double motif_objective(const FunctionalDataset& data, const Eigen::MatrixXd& motifs,
                       const Eigen::MatrixXd& memberships, const Eigen::MatrixXi& shifts,
                       bool derivative_distance = false);

// Each companion curve restricted to the c-day window at its hard-label shift.
// The companion must cover the same regions on the same grid as the fit.
FunctionalDataset apply_shifts(const MotifModel& model, const FunctionalDataset& companion);

}  // namespace fdepi
