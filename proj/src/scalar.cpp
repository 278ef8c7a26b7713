#include "fdepi/scalar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "fdepi/error.hpp"
#include "fdepi/rng.hpp"

namespace fdepi {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index ix(std::size_t v) { return static_cast<Index>(v); }

void check_labels(std::size_t count, const std::vector<std::string>& labels, const char* what) {
    if (labels.size() != count)
        throw ValidationError(std::string("expected ") + std::to_string(count) + " " + what + " labels, got " +
                              std::to_string(labels.size()));
}

}  // namespace

MatrixXd standardize_columns(const MatrixXd& m, const std::vector<std::string>& column_names) {
    check_labels(static_cast<std::size_t>(m.cols()), column_names, "column");
    if (m.rows() < 2) throw ValidationError("standardizing needs at least 2 rows");
    if (!m.allFinite()) throw ValidationError("matrix contains non-finite values");
    MatrixXd out(m.rows(), m.cols());
    for (Index j = 0; j < m.cols(); ++j) {
        const double mean = m.col(j).mean();
        const double sd = std::sqrt((m.col(j).array() - mean).square().sum() / static_cast<double>(m.rows() - 1));
        if (!(sd > 0.0)) throw ValidationError("column '" + column_names[static_cast<std::size_t>(j)] + "' is constant");
        out.col(j) = (m.col(j).array() - mean) / sd;
    }
    return out;
}

MatrixXd correlation_distance(const MatrixXd& items, const std::vector<std::string>& labels) {
    check_labels(static_cast<std::size_t>(items.rows()), labels, "item");
    MatrixXd c = items.colwise() - items.rowwise().mean();
    for (Index i = 0; i < c.rows(); ++i) {
        const double norm = c.row(i).norm();
        if (!(norm > 0.0)) throw ValidationError("item '" + labels[static_cast<std::size_t>(i)] + "' is constant");
        c.row(i) /= norm;
    }
    MatrixXd d = MatrixXd::Ones(c.rows(), c.rows()) - c * c.transpose();
    d.diagonal().setZero();
    return d.cwiseMax(0.0);
}

Dendrogram hcluster(const MatrixXd& m, Axis axis, const std::vector<std::string>& labels) {
    const MatrixXd items = axis == Axis::rows ? m : MatrixXd(m.transpose());
    const std::size_t n = static_cast<std::size_t>(items.rows());
    if (n < 2) throw ValidationError("clustering needs at least 2 items");
    MatrixXd d = correlation_distance(items, labels);

    Dendrogram out;
    out.labels = labels;
    std::vector<int> id(n);                       // current operand id of each active cluster
    std::vector<std::vector<std::size_t>> leaves(n);
    std::vector<bool> active(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        id[i] = -static_cast<int>(i + 1);
        leaves[i] = {i};
    }
    for (std::size_t step = 1; step < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t a = 0, b = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j)
                if (active[j] && d(ix(i), ix(j)) < best) {
                    best = d(ix(i), ix(j));
                    a = i;
                    b = j;
                }
        }
        // R's ordering: leaves before clusters, then smaller id first.
        std::array<int, 2> pair{id[a], id[b]};
        auto rank = [](int v) { return v < 0 ? std::pair{0, -v} : std::pair{1, v}; };
        if (rank(pair[1]) < rank(pair[0])) std::swap(pair[0], pair[1]);
        const bool a_first = pair[0] == id[a];
        out.merge.push_back(pair);
        out.heights.push_back(best);
        auto merged = a_first ? leaves[a] : leaves[b];
        const auto& tail = a_first ? leaves[b] : leaves[a];
        merged.insert(merged.end(), tail.begin(), tail.end());
        leaves[a] = std::move(merged);
        leaves[b].clear();
        active[b] = false;
        id[a] = static_cast<int>(step);
        for (std::size_t k = 0; k < n; ++k)
            if (active[k] && k != a) {
                const double v = std::max(d(ix(a), ix(k)), d(ix(b), ix(k)));
                d(ix(a), ix(k)) = v;
                d(ix(k), ix(a)) = v;
            }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (active[i]) out.order = leaves[i];
    return out;
}

double h_margin_correction(std::size_t m) {
    if (m < 2) return 1.0;
    return 2.0 * static_cast<double>(m - 1) / static_cast<double>(m);
}

double h_correction(std::size_t rows, std::size_t cols) { return h_margin_correction(rows) * h_margin_correction(cols); }

namespace {

void check_index_sets(const MatrixXd& m, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    if (rows.empty() || cols.empty()) throw ValidationError("bicluster row and column sets must be non-empty");
    for (std::size_t r : rows)
        if (r >= static_cast<std::size_t>(m.rows())) throw ValidationError("bicluster row index out of range");
    for (std::size_t c : cols)
        if (c >= static_cast<std::size_t>(m.cols())) throw ValidationError("bicluster column index out of range");
}

// Residues x_ij - x_Ij on the submatrix, rows x cols.
MatrixXd residues(const MatrixXd& m, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    MatrixXd r(ix(rows.size()), ix(cols.size()));
    for (std::size_t b = 0; b < cols.size(); ++b) {
        double mean = 0.0;
        for (std::size_t a = 0; a < rows.size(); ++a) mean += m(ix(rows[a]), ix(cols[b]));
        mean /= static_cast<double>(rows.size());
        for (std::size_t a = 0; a < rows.size(); ++a) r(ix(a), ix(b)) = m(ix(rows[a]), ix(cols[b])) - mean;
    }
    return r;
}

double score(const MatrixXd& m, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    return residues(m, rows, cols).array().square().mean();
}

double adjusted(const MatrixXd& m, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    return score(m, rows, cols) / h_correction(rows.size(), cols.size());
}

std::vector<std::size_t> complement(const std::vector<std::size_t>& set, std::size_t n) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
        if (!std::binary_search(set.begin(), set.end(), i)) out.push_back(i);
    return out;
}

// Drops entries whose residue exceeds `threshold`, always keeping the `keep`
// lowest-residue ones.
void drop(std::vector<std::size_t>& set, const VectorXd& residue, double threshold, std::size_t keep, bool& changed) {
    std::vector<std::size_t> idx(set.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return residue(ix(a)) < residue(ix(b)); });
    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < idx.size(); ++k)
        if (k < keep || residue(ix(idx[k])) <= threshold) kept.push_back(set[idx[k]]);
    if (kept.size() < set.size()) changed = true;
    std::sort(kept.begin(), kept.end());
    set = std::move(kept);
}

std::optional<Bicluster> extract(const MatrixXd& m, const ChengChurchOptions& o) {
    const std::size_t nr = static_cast<std::size_t>(m.rows()), nc = static_cast<std::size_t>(m.cols());
    std::vector<std::size_t> I(nr), J(nc);
    std::iota(I.begin(), I.end(), 0);
    std::iota(J.begin(), J.end(), 0);

    // Multiple node deletion.
    while (adjusted(m, I, J) > o.delta) {
        bool changed = false;
        if (I.size() > 2 && I.size() >= o.multiple_deletion_min) {
            const MatrixXd r = residues(m, I, J);
            const double H = r.array().square().mean();
            drop(I, r.array().square().rowwise().mean(), o.deletion_factor * H, 2, changed);
        }
        if (adjusted(m, I, J) <= o.delta) break;
        if (J.size() > 2 && J.size() >= o.multiple_deletion_min) {
            const MatrixXd r = residues(m, I, J);
            const double H = r.array().square().mean();
            drop(J, r.array().square().colwise().mean().transpose(), o.deletion_factor * H, 2, changed);
        }
        if (!changed) break;
    }
    // Single node deletion.
    while (adjusted(m, I, J) > o.delta) {
        if (I.size() <= 2 && J.size() <= 2) return std::nullopt;
        const MatrixXd r = residues(m, I, J);
        const VectorXd d = r.array().square().rowwise().mean();
        const VectorXd e = r.array().square().colwise().mean().transpose();
        Index bi = 0, bj = 0;
        const double dmax = I.size() > 2 ? d.maxCoeff(&bi) : -1.0;
        const double emax = J.size() > 2 ? e.maxCoeff(&bj) : -1.0;
        if (dmax >= emax) I.erase(I.begin() + bi);
        else J.erase(J.begin() + bj);
    }
    // Node addition, best first: the outside row or column giving the lowest
    // adjusted score joins while that score stays within delta.
    for (;;) {
        double best = std::numeric_limits<double>::infinity();
        std::vector<std::size_t> bestI, bestJ;
        for (std::size_t j : complement(J, nc)) {
            auto trial = J;
            trial.insert(std::upper_bound(trial.begin(), trial.end(), j), j);
            const double h = adjusted(m, I, trial);
            if (h < best) {
                best = h;
                bestI = I;
                bestJ = std::move(trial);
            }
        }
        for (std::size_t i : complement(I, nr)) {
            auto trial = I;
            trial.insert(std::upper_bound(trial.begin(), trial.end(), i), i);
            const double h = adjusted(m, trial, J);
            if (h < best) {
                best = h;
                bestI = std::move(trial);
                bestJ = J;
            }
        }
        if (!(best <= o.delta)) break;
        I = std::move(bestI);
        J = std::move(bestJ);
    }
    if (I.size() < 2 || J.size() < 2) return std::nullopt;
    // Scored on the matrix the search saw, so masked cells count as masked.
    Bicluster b{I, J, score(m, I, J), 0.0};
    b.adjusted_h_score = b.h_score / h_correction(I.size(), J.size());
    return b;
}

}  // namespace

double h_score(const MatrixXd& m, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    check_index_sets(m, rows, cols);
    return score(m, rows, cols);
}

double adjusted_h_score(const MatrixXd& m, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    check_index_sets(m, rows, cols);
    return adjusted(m, rows, cols);
}

std::vector<Bicluster> cheng_church(const MatrixXd& standardized, const ChengChurchOptions& o) {
    if (!(o.delta > 0.0)) throw ValidationError("bicluster threshold delta must be > 0");
    if (!(o.deletion_factor >= 1.0)) throw ValidationError("multiple-deletion factor must be >= 1");
    if (standardized.rows() < 2 || standardized.cols() < 2) throw ValidationError("biclustering needs at least a 2x2 matrix");
    if (!standardized.allFinite()) throw ValidationError("matrix contains non-finite values");
    MatrixXd work = standardized;
    std::vector<Bicluster> out;
    for (std::size_t k = 0; k < o.max_biclusters; ++k) {
        auto b = extract(work, o);
        if (!b) break;
        Rng rng = Rng::substream(o.seed, k);
        for (std::size_t j : b->cols) {
            const double mean = work.col(ix(j)).mean();
            for (std::size_t i : b->rows)
                work(ix(i), ix(j)) = o.mask == MaskMode::column_mean ? mean : rng.normal();
        }
        out.push_back(std::move(*b));
    }
    return out;
}

DeltaTuning tune_delta(const MatrixXd& standardized, const std::vector<double>& targets, ChengChurchOptions base,
                       double lo, double hi, std::size_t points) {
    if (targets.empty()) throw ValidationError("delta tuning needs at least one target score");
    if (!(lo > 0.0 && hi > lo) || points < 2) throw ValidationError("delta grid must satisfy 0 < lo < hi with >= 2 points");
    base.max_biclusters = targets.size();
    DeltaTuning best;
    best.loss = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < points; ++k) {
        base.delta = lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(points - 1));
        auto found = cheng_church(standardized, base);
        if (found.size() < targets.size()) continue;
        double loss = 0.0;
        for (std::size_t t = 0; t < targets.size(); ++t)
            loss = std::max(loss, std::abs(found[t].adjusted_h_score - targets[t]));
        if (loss < best.loss) best = {base.delta, loss, std::move(found)};
    }
    if (!std::isfinite(best.loss))
        throw NumericalError("scalar-analytics", "tune_delta", "no delta on the grid yields enough biclusters");
    return best;
}

PcaResult pca(const MatrixXd& m, const std::vector<std::string>& column_names) {
    if (m.cols() < 2) throw ValidationError("PCA needs at least 2 columns");
    const MatrixXd z = standardize_columns(m, column_names);
    const MatrixXd corr = z.transpose() * z / static_cast<double>(m.rows() - 1);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(corr);
    const Index p = corr.rows();
    PcaResult out;
    out.loadings.resize(p, p);
    out.variances.resize(p);
    for (Index k = 0; k < p; ++k) {
        VectorXd v = es.eigenvectors().col(p - 1 - k);
        if (v(0) < 0.0) v = -v;
        out.loadings.col(k) = v;
        out.variances(k) = std::max(es.eigenvalues()(p - 1 - k), 0.0);
    }
    out.scores = z * out.loadings;
    out.explained = out.variances / out.variances.sum();
    return out;
}

VectorXd vif(const MatrixXd& m, const std::vector<std::string>& column_names) {
    check_labels(static_cast<std::size_t>(m.cols()), column_names, "column");
    const Index n = m.rows(), p = m.cols();
    if (p < 2) throw ValidationError("VIF needs at least 2 columns");
    if (n <= p) throw ValidationError("VIF needs more rows than columns");
    const MatrixXd z = standardize_columns(m, column_names);
    VectorXd out(p);
    for (Index j = 0; j < p; ++j) {
        MatrixXd X(n, p);
        X.col(0).setOnes();
        for (Index k = 0, c = 1; k < p; ++k)
            if (k != j) X.col(c++) = z.col(k);
        const VectorXd y = z.col(j);
        Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
        const VectorXd resid = y - X * qr.solve(y);
        const double unexplained = resid.squaredNorm() / y.squaredNorm();
        out(j) = unexplained < 1e-10 ? std::numeric_limits<double>::infinity() : 1.0 / unexplained;
    }
    return out;
}

}  // namespace fdepi
