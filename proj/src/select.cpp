#include "fdepi/select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fdepi/error.hpp"
#include "fdepi/quadrature.hpp"

namespace fdepi {

FpcExpansion fpc(const FunctionalDataset& data, double variance_target) {
    if (!(variance_target > 0.0 && variance_target <= 1.0))
        throw ValidationError("fpc: variance target must lie in (0, 1]");
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto t = static_cast<Eigen::Index>(data.length());
    if (n < 3) throw ValidationError("fpc: need at least 3 curves");

    FpcExpansion out;
    out.mean = data.values().colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.values().rowwise() - out.mean.transpose();
    const Eigen::VectorXd w = trapezoid_weights(data.length());
    const Eigen::VectorXd root = w.array().sqrt();

    // W^1/2 C W^1/2 with C the sample covariance surface.
    const Eigen::MatrixXd scaled = centered * root.asDiagonal();
    const Eigen::MatrixXd op = scaled.transpose() * scaled / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(op);
    if (eig.info() != Eigen::Success) throw NumericalError("feat-select", "fpc", "eigendecomposition failed");

    // Eigen sorts ascending.
    out.eigenvalues = eig.eigenvalues().reverse().cwiseMax(0.0);
    Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
    const double total = out.eigenvalues.sum();
    if (!(total > 0.0)) throw NumericalError("feat-select", "fpc", "curves have zero variance");
    out.cumulative.resize(t);
    double run = 0.0;
    for (Eigen::Index k = 0; k < t; ++k) {
        run += out.eigenvalues(k);
        out.cumulative(k) = run / total;
    }
    out.cumulative(t - 1) = 1.0;

    std::size_t m = 1;
    while (static_cast<Eigen::Index>(m) < t && out.cumulative(static_cast<Eigen::Index>(m) - 1) < variance_target - 1e-12)
        ++m;
    out.components = m;

    const auto mm = static_cast<Eigen::Index>(m);
    out.eigenfunctions = root.cwiseInverse().asDiagonal() * vectors.leftCols(mm);
    // Deterministic sign: largest-magnitude sample positive.
    for (Eigen::Index k = 0; k < mm; ++k) {
        Eigen::Index arg = 0;
        out.eigenfunctions.col(k).cwiseAbs().maxCoeff(&arg);
        if (out.eigenfunctions(arg, k) < 0.0) out.eigenfunctions.col(k) *= -1.0;
    }
    out.scores = centered * w.asDiagonal() * out.eigenfunctions;
    return out;
}

namespace {

double sample_size(const GroupNetProblem& p) { return static_cast<double>(p.design.rows()); }

void check_problem(const GroupNetProblem& p, double lambda) {
    if (!(p.alpha > 0.0 && p.alpha <= 1.0)) throw ValidationError("select: alpha must lie in (0, 1]");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("select: lambda must be non-negative");
    if (p.design.rows() != p.responses.rows())
        throw ValidationError("select: scores and covariates have different row counts");
    if (p.design.rows() < 2) throw ValidationError("select: need at least 2 observations");
}

// argmin_b c/2 |b|^2 - g'b + tau |b| + ridge/2 |b|^2
Eigen::RowVectorXd group_update(const Eigen::RowVectorXd& g, double c, double tau, double ridge) {
    const double norm = g.norm();
    // The relative slack absorbs rounding in lambda_max itself.
    if (norm <= tau * (1.0 + 1e-12)) return Eigen::RowVectorXd::Zero(g.size());
    return (1.0 - tau / norm) / (c + ridge) * g;
}

}  // namespace

double group_net_objective(const GroupNetProblem& p, const Eigen::MatrixXd& coef, double lambda) {
    const double n = sample_size(p);
    const double loss = (p.responses - p.design * coef).squaredNorm() / (2.0 * n);
    double l1 = 0.0;
    double l2 = 0.0;
    for (Eigen::Index j = 0; j < coef.rows(); ++j) {
        const double s = coef.row(j).norm();
        l1 += s;
        l2 += s * s;
    }
    return loss + lambda * (p.alpha * l1 + 0.5 * (1.0 - p.alpha) * l2);
}

double group_net_kkt(const GroupNetProblem& p, const Eigen::MatrixXd& coef, double lambda) {
    const double n = sample_size(p);
    const Eigen::MatrixXd grad = p.design.transpose() * (p.responses - p.design * coef) / n;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < coef.rows(); ++j) {
        const double s = coef.row(j).norm();
        if (s == 0.0) {
            worst = std::max(worst, grad.row(j).norm() - lambda * p.alpha);
        } else {
            const Eigen::RowVectorXd r =
                grad.row(j) - lambda * (1.0 - p.alpha) * coef.row(j) - lambda * p.alpha / s * coef.row(j);
            worst = std::max(worst, r.norm());
        }
    }
    return worst;
}

double group_net_lambda_max(const GroupNetProblem& p) {
    check_problem(p, 0.0);
    const double n = sample_size(p);
    const Eigen::MatrixXd g = p.design.transpose() * p.responses;
    return g.rowwise().norm().maxCoeff() / (n * p.alpha);
}

Eigen::MatrixXd group_net_bcd(const GroupNetProblem& p, double lambda, const Eigen::MatrixXd& start, double tol,
                              std::vector<double>* trace) {
    check_problem(p, lambda);
    const double n = sample_size(p);
    const Eigen::Index cols = p.design.cols();
    if (start.rows() != cols || start.cols() != p.responses.cols())
        throw ValidationError("select: warm start has the wrong shape");

    Eigen::MatrixXd coef = start;
    Eigen::MatrixXd resid = p.responses - p.design * coef;
    const Eigen::VectorXd c = p.design.colwise().squaredNorm().transpose() / n;
    const double tau = lambda * p.alpha;
    const double ridge = lambda * (1.0 - p.alpha);

    constexpr int max_sweeps = 1000000;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            const Eigen::RowVectorXd old = coef.row(j);
            const Eigen::RowVectorXd g = p.design.col(j).transpose() * resid / n + c(j) * old;
            const Eigen::RowVectorXd fresh = group_update(g, c(j), tau, ridge);
            const Eigen::RowVectorXd delta = fresh - old;
            if (delta.squaredNorm() > 0.0) {
                resid.noalias() -= p.design.col(j) * delta;
                coef.row(j) = fresh;
            }
        }
        if (trace) trace->push_back(group_net_objective(p, coef, lambda));
        // Residuals drift after many rank-one updates.
        if (sweep % 50 == 49) resid = p.responses - p.design * coef;
        if (group_net_kkt(p, coef, lambda) <= tol) return coef;
    }
    throw NumericalError("feat-select", "bcd", "KKT tolerance not reached");
}

Eigen::MatrixXd group_net_proximal(const GroupNetProblem& p, double lambda, double tol, std::size_t max_iterations) {
    check_problem(p, lambda);
    const double n = sample_size(p);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(p.design);
    const double top = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    const double lip = top * top / n + lambda * (1.0 - p.alpha);
    if (!(lip > 0.0)) return Eigen::MatrixXd::Zero(p.design.cols(), p.responses.cols());
    const double step = 1.0 / lip;
    const Eigen::MatrixXd gram = p.design.transpose() * p.design / n;
    const Eigen::MatrixXd cross = p.design.transpose() * p.responses / n;

    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(p.design.cols(), p.responses.cols());
    for (std::size_t it = 0; it < max_iterations; ++it) {
        const Eigen::MatrixXd grad = gram * coef - cross + lambda * (1.0 - p.alpha) * coef;
        Eigen::MatrixXd next = coef - step * grad;
        for (Eigen::Index j = 0; j < next.rows(); ++j) {
            const double s = next.row(j).norm();
            const double keep = s > step * lambda * p.alpha ? 1.0 - step * lambda * p.alpha / s : 0.0;
            next.row(j) *= keep;
        }
        const double change = (next - coef).cwiseAbs().maxCoeff();
        coef = std::move(next);
        if (change <= tol) return coef;
    }
    throw NumericalError("feat-select", "proximal", "iteration limit reached");
}

void check_standardized(const Eigen::MatrixXd& design, const std::vector<std::string>& covariates) {
    if (static_cast<Eigen::Index>(covariates.size()) != design.cols())
        throw ValidationError("select: covariate name count does not match the design");
    const double n = static_cast<double>(design.rows());
    for (Eigen::Index j = 0; j < design.cols(); ++j) {
        const double mean = design.col(j).mean();
        const double sd = std::sqrt((design.col(j).array() - mean).square().sum() / (n - 1.0));
        if (std::abs(mean) > 1e-6 || std::abs(sd - 1.0) > 1e-6)
            throw ValidationError("select: covariate '" + covariates[static_cast<std::size_t>(j)] +
                                  "' is not standardized (mean " + std::to_string(mean) + ", sd " +
                                  std::to_string(sd) + ")");
    }
}

SelectionPath select(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& design,
                     const std::vector<std::string>& covariates, const SelectOptions& options) {
    check_standardized(design, covariates);
    if (options.path_length < 1) throw ValidationError("select: empty lambda path");
    if (!(options.lambda_min_ratio > 0.0 && options.lambda_min_ratio <= 1.0))
        throw ValidationError("select: lambda ratio must lie in (0, 1]");
    GroupNetProblem problem{scores, design, options.alpha};
    const double top = group_net_lambda_max(problem);

    SelectionPath path;
    path.covariates = covariates;
    const std::size_t len = options.path_length;
    for (std::size_t k = 0; k < len; ++k) {
        const double frac = len == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(len - 1);
        path.lambdas.push_back(top * std::pow(options.lambda_min_ratio, frac));
    }

    const auto p = static_cast<std::size_t>(design.cols());
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(design.cols(), scores.cols());
    std::vector<std::size_t> entered(p, len);
    for (std::size_t k = 0; k < len; ++k) {
        coef = group_net_bcd(problem, path.lambdas[k], coef, options.tolerance);
        path.coefficients.push_back(coef);
        std::vector<std::size_t> active;
        for (std::size_t j = 0; j < p; ++j) {
            if (coef.row(static_cast<Eigen::Index>(j)).norm() > 0.0) {
                active.push_back(j);
                if (entered[j] == len) entered[j] = k;
            }
        }
        path.active.push_back(std::move(active));
    }

    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < p; ++j)
        if (entered[j] < len) order.push_back(j);
    // Ties at the same entry point: larger group norm at the smallest lambda
    // where all tied covariates are active.
    auto tie_norm = [&](std::size_t j, std::size_t at) {
        return path.coefficients[at].row(static_cast<Eigen::Index>(j)).norm();
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return entered[a] < entered[b];
    });
    for (std::size_t lo = 0; lo < order.size();) {
        std::size_t hi = lo + 1;
        while (hi < order.size() && entered[order[hi]] == entered[order[lo]]) ++hi;
        if (hi - lo > 1) {
            std::size_t shared = entered[order[lo]];
            for (std::size_t k = len; k-- > shared;) {
                bool all = true;
                for (std::size_t i = lo; i < hi; ++i)
                    all = all && tie_norm(order[i], k) > 0.0;
                if (all) {
                    shared = k;
                    break;
                }
            }
            std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(lo),
                             order.begin() + static_cast<std::ptrdiff_t>(hi),
                             [&](std::size_t a, std::size_t b) { return tie_norm(a, shared) > tie_norm(b, shared); });
        }
        lo = hi;
    }
    path.entry_order = order;
    for (std::size_t j : order) path.entry_lambda.push_back(path.lambdas[entered[j]]);
    return path;
}

std::vector<std::string> top_features(const SelectionPath& path, std::size_t k) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < path.entry_order.size() && i < k; ++i) out.push_back(path.covariates[path.entry_order[i]]);
    return out;
}

}  // namespace fdepi
