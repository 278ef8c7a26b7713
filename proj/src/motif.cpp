#include "fdepi/motif.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "fdepi/error.hpp"
#include "fdepi/parallel.hpp"
#include "fdepi/rng.hpp"

namespace fdepi {

namespace {

// Distance of the window x[start, start + c) to v, without allocating.
double window_distance(const Eigen::MatrixXd& x, Eigen::Index row, Eigen::Index start, const Eigen::MatrixXd& v,
                       Eigen::Index k) {
    const Eigen::Index c = v.cols();
    double total = 0.0;
    for (Eigen::Index t = 0; t < c; ++t) {
        const double d = x(row, start + t) - v(k, t);
        total += (t == 0 || t == c - 1) ? 0.5 * d * d : d * d;
    }
    return total / static_cast<double>(c - 1);
}

struct Work {
    Eigen::MatrixXd x;  // curves the distance is computed on
    Eigen::Index c;     // motif length on x
};

Work working_curves(const FunctionalDataset& data, const MotifOptions& o) {
    if (o.clusters < 1) throw ValidationError("motif clustering needs at least one cluster");
    if (o.clusters > data.size())
        throw ValidationError("motif clustering: " + std::to_string(o.clusters) + " clusters for " +
                              std::to_string(data.size()) + " curves");
    if (o.motif_length > data.length())
        throw ValidationError("motif length " + std::to_string(o.motif_length) + " exceeds the grid length " +
                              std::to_string(data.length()));
    if (o.motif_length < (o.derivative_distance ? 3u : 2u)) throw ValidationError("motif length too short");
    if (o.restarts < 1) throw ValidationError("motif clustering needs at least one restart");
    if (o.max_iterations < 1) throw ValidationError("motif clustering needs at least one iteration");
    const auto& y = data.values();
    if (!o.derivative_distance) return {y, static_cast<Eigen::Index>(o.motif_length)};
    const Eigen::Index T = y.cols();
    return {y.rightCols(T - 1) - y.leftCols(T - 1), static_cast<Eigen::Index>(o.motif_length) - 1};
}

void update_motifs(const Work& w, const Eigen::MatrixXd& p, const Eigen::MatrixXi& s, Eigen::MatrixXd& v) {
    for (Eigen::Index k = 0; k < p.cols(); ++k) {
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(w.c);
        double total = 0.0;
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            const double wt = p(i, k) * p(i, k);
            if (wt == 0.0) continue;
            acc += wt * w.x.block(i, s(i, k), 1, w.c);
            total += wt;
        }
        // A cluster nobody belongs to keeps its previous motif.
        if (total > 0.0) v.row(k) = acc / total;
    }
}

void update_shifts(const Work& w, const Eigen::MatrixXd& v, Eigen::MatrixXi& s, Eigen::MatrixXd& d) {
    const Eigen::Index max_shift = w.x.cols() - w.c;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        for (Eigen::Index k = 0; k < s.cols(); ++k) {
            double best = std::numeric_limits<double>::infinity();
            Eigen::Index best_shift = 0;
            for (Eigen::Index sh = 0; sh <= max_shift; ++sh) {
                const double dist = window_distance(w.x, i, sh, v, k);
                if (dist < best) {
                    best = dist;
                    best_shift = sh;
                }
            }
            s(i, k) = static_cast<int>(best_shift);
            d(i, k) = best;
        }
    }
}

void update_memberships(const Eigen::MatrixXd& d, Eigen::MatrixXd& p) {
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        const Eigen::Index zeros = (d.row(i).array() == 0.0).count();
        if (zeros > 0) {
            for (Eigen::Index k = 0; k < d.cols(); ++k) p(i, k) = d(i, k) == 0.0 ? 1.0 / static_cast<double>(zeros) : 0.0;
            continue;
        }
        const Eigen::RowVectorXd inv = d.row(i).cwiseInverse();
        p.row(i) = inv / inv.sum();
    }
}

double objective(const Eigen::MatrixXd& p, const Eigen::MatrixXd& d) { return (p.array().square() * d.array()).sum(); }

MotifModel run(const FunctionalDataset& data, const MotifOptions& o, const Work& w, Eigen::MatrixXd p,
               Eigen::MatrixXi s) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto K = static_cast<Eigen::Index>(o.clusters);
    MotifModel m;
    m.clusters = o.clusters;
    m.motif_length = o.motif_length;
    m.grid_length = data.length();
    m.names = data.names();
    m.derivative_distance = o.derivative_distance;
    m.motifs = Eigen::MatrixXd::Zero(K, w.c);
    m.distances = Eigen::MatrixXd::Zero(n, K);

    for (std::size_t it = 0; it < o.max_iterations; ++it) {
        update_motifs(w, p, s, m.motifs);
        update_shifts(w, m.motifs, s, m.distances);
        update_memberships(m.distances, p);
        const double J = objective(p, m.distances);
        const bool has_previous = !m.objective_trace.empty();
        const double previous = has_previous ? m.objective_trace.back() : 0.0;
        m.objective_trace.push_back(J);
        if (J == 0.0 || (has_previous && std::abs(previous - J) <= o.tolerance * J)) {
            m.converged = true;
            break;
        }
    }
    m.memberships = std::move(p);
    m.shifts = std::move(s);
    return m;
}

void assign_hard_labels(MotifModel& m) {
    m.hard_labels.assign(static_cast<std::size_t>(m.memberships.rows()), 0);
    for (Eigen::Index i = 0; i < m.memberships.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < m.memberships.cols(); ++k)
            if (m.memberships(i, k) > m.memberships(i, best)) best = k;
        m.hard_labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    }
}

// Clusters renumbered by decreasing motif maximum.
void canonical_order(MotifModel& m) {
    const auto K = static_cast<Eigen::Index>(m.clusters);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(K));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return m.motifs.row(a).maxCoeff() > m.motifs.row(b).maxCoeff(); });
    Eigen::MatrixXd motifs(m.motifs.rows(), m.motifs.cols()), p(m.memberships.rows(), K), d(m.distances.rows(), K);
    Eigen::MatrixXi s(m.shifts.rows(), K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const auto src = order[static_cast<std::size_t>(k)];
        motifs.row(k) = m.motifs.row(src);
        p.col(k) = m.memberships.col(src);
        d.col(k) = m.distances.col(src);
        s.col(k) = m.shifts.col(src);
    }
    m.motifs = std::move(motifs);
    m.memberships = std::move(p);
    m.distances = std::move(d);
    m.shifts = std::move(s);
}

void check_start(const FunctionalDataset& data, const MotifOptions& o, const Work& w, const Eigen::MatrixXd& p,
                 const Eigen::MatrixXi& s) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto K = static_cast<Eigen::Index>(o.clusters);
    if (p.rows() != n || p.cols() != K || s.rows() != n || s.cols() != K)
        throw ValidationError("motif clustering: starting memberships/shifts must be " + std::to_string(n) + " x " +
                              std::to_string(K));
    if (s.minCoeff() < 0 || s.maxCoeff() > w.x.cols() - w.c)
        throw ValidationError("motif clustering: starting shift outside [0, T - c]");
    if ((p.array() < 0.0).any()) throw ValidationError("motif clustering: negative starting membership");
}

}  // namespace

double l2_distance(const Eigen::Ref<const Eigen::VectorXd>& portion, const Eigen::Ref<const Eigen::VectorXd>& motif) {
    if (portion.size() != motif.size())
        throw ValidationError("l2_distance: curves of length " + std::to_string(portion.size()) + " and " +
                              std::to_string(motif.size()));
    if (portion.size() < 2) throw ValidationError("l2_distance: curves need at least 2 samples");
    const Eigen::MatrixXd x = portion.transpose();
    const Eigen::MatrixXd v = motif.transpose();
    return window_distance(x, 0, 0, v, 0);
}

std::vector<std::size_t> MotifModel::members(std::size_t k) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < hard_labels.size(); ++i)
        if (hard_labels[i] == k) out.push_back(i);
    return out;
}

MotifModel prob_kma_from(const FunctionalDataset& data, const MotifOptions& options, const Eigen::MatrixXd& memberships,
                         const Eigen::MatrixXi& shifts) {
    const Work w = working_curves(data, options);
    check_start(data, options, w, memberships, shifts);
    MotifModel m = run(data, options, w, memberships, shifts);
    assign_hard_labels(m);
    return m;
}

MotifModel prob_kma(const FunctionalDataset& data, const MotifOptions& options) {
    const Work w = working_curves(data, options);
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto K = static_cast<Eigen::Index>(options.clusters);
    const auto shift_count = static_cast<std::uint64_t>(w.x.cols() - w.c + 1);

    std::vector<MotifModel> fits(options.restarts);
    parallel_for(options.restarts, options.threads, [&](std::size_t r) {
        Rng rng = Rng::substream(options.seed, r);
        Eigen::MatrixXd p(n, K);
        Eigen::MatrixXi s(n, K);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto weights = rng.dirichlet_flat(static_cast<std::size_t>(K));
            for (Eigen::Index k = 0; k < K; ++k) p(i, k) = weights[static_cast<std::size_t>(k)];
        }
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index k = 0; k < K; ++k) s(i, k) = static_cast<int>(rng.below(shift_count));
        fits[r] = run(data, options, w, std::move(p), std::move(s));
        fits[r].best_restart = r;
    });

    std::size_t best = 0;
    for (std::size_t r = 1; r < fits.size(); ++r)
        if (fits[r].objective() < fits[best].objective()) best = r;
    MotifModel m = std::move(fits[best]);
    canonical_order(m);
    assign_hard_labels(m);
    return m;
}

double motif_objective(const FunctionalDataset& data, const Eigen::MatrixXd& motifs, const Eigen::MatrixXd& memberships,
                       const Eigen::MatrixXi& shifts, bool derivative_distance) {
    MotifOptions o;
    o.clusters = static_cast<std::size_t>(motifs.rows());
    o.motif_length = static_cast<std::size_t>(motifs.cols()) + (derivative_distance ? 1 : 0);
    o.derivative_distance = derivative_distance;
    const Work w = working_curves(data, o);
    check_start(data, o, w, memberships, shifts);
    double J = 0.0;
    for (Eigen::Index i = 0; i < memberships.rows(); ++i)
        for (Eigen::Index k = 0; k < memberships.cols(); ++k)
            J += memberships(i, k) * memberships(i, k) * window_distance(w.x, i, shifts(i, k), motifs, k);
    return J;
}

FunctionalDataset apply_shifts(const MotifModel& model, const FunctionalDataset& companion) {
    if (companion.length() != model.grid_length)
        throw ValidationError("apply_shifts: companion has " + std::to_string(companion.length()) +
                              " days, the motif fit used " + std::to_string(model.grid_length));
    if (companion.size() != model.names.size())
        throw ValidationError("apply_shifts: companion covers " + std::to_string(companion.size()) +
                              " regions, the motif fit used " + std::to_string(model.names.size()));
    const auto ordered = companion.reordered(model.names);
    const auto c = static_cast<Eigen::Index>(model.motif_length);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(model.names.size()), c);
    for (std::size_t i = 0; i < model.names.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = ordered.values().block(static_cast<Eigen::Index>(i), model.shift_of(i), 1, c);
    return FunctionalDataset(TimeGrid(model.motif_length), model.names, std::move(out));
}

}  // namespace fdepi
