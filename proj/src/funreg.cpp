#include "fdepi/funreg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <gsl/gsl_cdf.h>
#include <gsl/gsl_multimin.h>

#include "fdepi/bspline.hpp"
#include "fdepi/error.hpp"
#include "fdepi/parallel.hpp"
#include "fdepi/quadrature.hpp"

namespace fdepi {

std::size_t FunRegSpec::group_count() const {
    if (groups.empty()) return 1;
    return *std::max_element(groups.begin(), groups.end()) + 1;
}

std::vector<std::string> FunRegSpec::term_names() const {
    std::vector<std::string> out;
    for (const auto& f : functional) out.push_back(f.name);
    for (const auto& s : scalar) out.push_back(s.name);
    return out;
}

FunRegSpec FunRegSpec::without(const std::string& term) const {
    FunRegSpec out{response, {}, {}, groups};
    bool found = false;
    for (const auto& f : functional) {
        if (f.name == term) found = true;
        else out.functional.push_back(f);
    }
    for (const auto& s : scalar) {
        if (s.name == term) found = true;
        else out.scalar.push_back(s);
    }
    if (!found) throw ValidationError("unknown model term '" + term + "'");
    return out;
}

FunRegSpec FunRegSpec::subset(const std::vector<std::size_t>& rows) const {
    FunRegSpec out{response.subset(rows), {}, {}, {}};
    for (const auto& f : functional) out.functional.push_back({f.name, f.values.subset(rows)});
    for (const auto& s : scalar) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k)
            v(static_cast<Eigen::Index>(k)) = s.values(static_cast<Eigen::Index>(rows[k]));
        out.scalar.push_back({s.name, v});
    }
    if (!groups.empty())
        for (std::size_t r : rows) out.groups.push_back(groups[r]);
    return out;
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index ix(std::size_t v) { return static_cast<Index>(v); }

void validate(const FunRegSpec& spec, const FunRegOptions& o) {
    const std::size_t n = spec.response.size();
    if (n < 3) throw ValidationError("functional regression needs at least 3 curves");
    if (o.basis_dimension < 4) throw ValidationError("basis dimension must be >= 4");
    if (o.basis_dimension > spec.response.length())
        throw ValidationError("basis dimension exceeds the response grid length");
    for (const auto& f : spec.functional) {
        if (f.values.names() != spec.response.names())
            throw ValidationError("functional predictor '" + f.name +
                                  "' does not share the response's region order");
        if (o.basis_dimension > f.values.length())
            throw ValidationError("basis dimension exceeds the grid of '" + f.name + "'");
    }
    for (const auto& s : spec.scalar)
        if (static_cast<std::size_t>(s.values.size()) != n)
            throw ValidationError("scalar covariate '" + s.name + "' has " +
                                  std::to_string(s.values.size()) + " values for " +
                                  std::to_string(n) + " curves");
    auto names = spec.term_names();
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end())
        throw ValidationError("duplicate model term names");
    if (!spec.groups.empty()) {
        if (spec.groups.size() != n) throw ValidationError("group labels do not match the curve count");
        std::vector<std::size_t> count(spec.group_count(), 0);
        for (std::size_t g : spec.groups) ++count[g];
        for (std::size_t g = 0; g < count.size(); ++g)
            if (count[g] == 0) throw ValidationError("group " + std::to_string(g) + " has no curves");
    }
    const std::size_t expected = 2 * spec.functional.size() + spec.scalar.size();
    if (o.lambdas) {
        if (o.lambdas->size() != expected)
            throw ValidationError("expected " + std::to_string(expected) + " smoothing parameters, got " +
                                  std::to_string(o.lambdas->size()));
        for (double l : *o.lambdas)
            if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError("smoothing parameters must be finite and >= 0");
    }
}

// Everything that does not depend on the smoothing parameters.
struct Problem {
    std::size_t n = 0, T = 0, G = 1, L = 0, J = 0, K = 0, q = 0;
    std::vector<std::size_t> group;
    std::vector<std::size_t> S;          // grid length per functional term
    std::vector<MatrixXd> Phi;           // S x K per functional term
    std::vector<MatrixXd> Ps, Ms;        // K x K per functional term
    std::vector<VectorXd> mu;            // generalized eigenvalues of (Ps, Ms)
    std::vector<double> log_det_ms;
    std::vector<VectorXd> ws;
    VectorXd wt;
    VectorXd d;                          // t-penalty eigenvalues, null ones exactly 0
    MatrixXd psi;                        // T x K transformed t-basis, unweighted
    MatrixXd Gc, GtG, Yb;
    double r_perp = 0.0;
    VectorXd scalar_mean, scalar_sd;
    MatrixXd y_group_mean;               // G x T
    std::vector<MatrixXd> x_group_mean;  // per functional term, G x S
    MatrixXd s_group_mean;               // G x J, original units
    std::size_t null_dim = 0;
    double n_eff = 0.0;
};

MatrixXd group_means(const MatrixXd& m, const std::vector<std::size_t>& group, std::size_t G) {
    MatrixXd out = MatrixXd::Zero(ix(G), m.cols());
    std::vector<double> count(G, 0.0);
    for (std::size_t i = 0; i < group.size(); ++i) {
        out.row(ix(group[i])) += m.row(ix(i));
        count[group[i]] += 1.0;
    }
    for (std::size_t g = 0; g < G; ++g) out.row(ix(g)) /= count[g];
    return out;
}

Problem prepare(const FunRegSpec& spec, const FunRegOptions& o) {
    Problem p;
    p.n = spec.response.size();
    p.T = spec.response.length();
    p.G = spec.group_count();
    p.L = spec.functional.size();
    p.J = spec.scalar.size();
    p.K = o.basis_dimension;
    p.q = p.L * p.K + p.J;
    p.group = spec.groups.empty() ? std::vector<std::size_t>(p.n, 0) : spec.groups;

    const auto tb = BSplineBasis::uniform(0.0, static_cast<double>(p.T - 1), p.K);
    const MatrixXd psi0 = tb.evaluate(TimeGrid(p.T).abscissae());
    p.wt = trapezoid_weights(p.T);
    const MatrixXd Mt = psi0.transpose() * p.wt.asDiagonal() * psi0;
    const MatrixXd Pt = tb.penalty(2);
    // Whiten the t-basis so the weighted Gram is I and the penalty diagonal.
    Eigen::LLT<MatrixXd> mt_llt(Mt);
    const MatrixXd Rinv = MatrixXd(mt_llt.matrixU()).inverse();
    MatrixXd Pw = Rinv.transpose() * Pt * Rinv;
    Pw = 0.5 * (Pw + Pw.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> pe(Pw);
    p.d = pe.eigenvalues();
    p.d.head(2).setZero();
    const MatrixXd tm = Rinv * pe.eigenvectors();
    p.psi = psi0 * tm;

    for (const auto& f : spec.functional) {
        const std::size_t S = f.values.length();
        const auto sb = BSplineBasis::uniform(0.0, static_cast<double>(S - 1), p.K);
        MatrixXd phi = sb.evaluate(TimeGrid(S).abscissae());
        VectorXd ws = trapezoid_weights(S);
        MatrixXd ms = phi.transpose() * ws.asDiagonal() * phi;
        MatrixXd ps = sb.penalty(2);
        Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ge(ps, ms);
        VectorXd mu = ge.eigenvalues();
        mu.head(2).setZero();
        p.log_det_ms.push_back(2.0 * Eigen::LLT<MatrixXd>(ms).matrixL().toDenseMatrix().diagonal().array().log().sum());
        p.S.push_back(S);
        p.Phi.push_back(std::move(phi));
        p.ws.push_back(std::move(ws));
        p.Ms.push_back(std::move(ms));
        p.Ps.push_back(std::move(ps));
        p.mu.push_back(std::move(mu));
    }

    MatrixXd G(ix(p.n), ix(p.q));
    for (std::size_t l = 0; l < p.L; ++l) {
        const MatrixXd& x = spec.functional[l].values.values();
        G.middleCols(ix(l * p.K), ix(p.K)) = x * p.ws[l].asDiagonal() * p.Phi[l];
        p.x_group_mean.push_back(group_means(x, p.group, p.G));
    }
    p.scalar_mean = VectorXd::Zero(ix(p.J));
    p.scalar_sd = VectorXd::Ones(ix(p.J));
    MatrixXd sraw(ix(p.n), ix(p.J));
    for (std::size_t j = 0; j < p.J; ++j) {
        const VectorXd& v = spec.scalar[j].values;
        if (!v.allFinite()) throw ValidationError("scalar covariate '" + spec.scalar[j].name + "' has non-finite values");
        const double m = v.mean();
        const double sd = std::sqrt((v.array() - m).square().sum() / static_cast<double>(p.n - 1));
        if (!(sd > 0.0)) throw ValidationError("scalar covariate '" + spec.scalar[j].name + "' is constant");
        p.scalar_mean(ix(j)) = m;
        p.scalar_sd(ix(j)) = sd;
        sraw.col(ix(j)) = v;
        G.col(ix(p.L * p.K + j)) = (v.array() - m) / sd;
    }
    p.s_group_mean = group_means(sraw, p.group, p.G);
    const MatrixXd& Y = spec.response.values();
    if (!Y.allFinite()) throw ValidationError("response contains non-finite values");
    p.y_group_mean = group_means(Y, p.group, p.G);
    const MatrixXd g_mean = group_means(G, p.group, p.G);
    p.Gc = G;
    MatrixXd Yc = Y;
    for (std::size_t i = 0; i < p.n; ++i) {
        p.Gc.row(ix(i)) -= g_mean.row(ix(p.group[i]));
        Yc.row(ix(i)) -= p.y_group_mean.row(ix(p.group[i]));
    }
    p.GtG = p.Gc.transpose() * p.Gc;
    const VectorXd sw = p.wt.array().sqrt();
    const MatrixXd Yw = Yc * sw.asDiagonal();
    const MatrixXd psi_w = sw.asDiagonal() * p.psi;
    p.Yb = Yw * psi_w;
    p.r_perp = (Yw - p.Yb * psi_w.transpose()).squaredNorm();
    p.null_dim = 2 * (2 * p.L + p.J);
    p.n_eff = static_cast<double>((p.n - p.G) * p.T);
    return p;
}

MatrixXd penalty_block(const Problem& p, const std::vector<double>& lambda, std::size_t b) {
    MatrixXd S = MatrixXd::Zero(ix(p.q), ix(p.q));
    const double db = p.d(ix(b));
    for (std::size_t l = 0; l < p.L; ++l)
        S.block(ix(l * p.K), ix(l * p.K), ix(p.K), ix(p.K)) =
            lambda[2 * l] * p.Ps[l] + db * lambda[2 * l + 1] * p.Ms[l];
    for (std::size_t j = 0; j < p.J; ++j) {
        const Index c = ix(p.L * p.K + j);
        S(c, c) = db * lambda[2 * p.L + j];
    }
    return S;
}

double log_pdet_penalty(const Problem& p, const std::vector<double>& lambda) {
    double out = 0.0;
    for (Index b = 0; b < p.d.size(); ++b) {
        const double db = p.d(b);
        for (std::size_t l = 0; l < p.L; ++l) {
            const double ls = lambda[2 * l], lt = lambda[2 * l + 1];
            if (db > 0.0) {
                out += p.log_det_ms[l];
                for (Index a = 0; a < p.mu[l].size(); ++a) out += std::log(ls * p.mu[l](a) + db * lt);
            } else {
                for (Index a = 0; a < p.mu[l].size(); ++a)
                    if (p.mu[l](a) > 0.0) out += std::log(ls * p.mu[l](a));
            }
        }
        if (db > 0.0)
            for (std::size_t j = 0; j < p.J; ++j) out += std::log(db * lambda[2 * p.L + j]);
    }
    return out;
}

bool well_conditioned(const Eigen::LLT<MatrixXd>& llt, const MatrixXd& A) {
    if (A.size() == 0) return true;
    if (llt.info() != Eigen::Success) return false;
    const VectorXd piv = llt.matrixLLT().diagonal().array().square();
    const double scale = A.diagonal().cwiseAbs().maxCoeff();
    return scale > 0.0 && piv.minCoeff() > 1e-12 * scale;
}

struct Solution {
    MatrixXd theta;              // q x K
    std::vector<MatrixXd> ainv;  // per b
    double rss = 0.0, pen = 0.0, log_det_a = 0.0, edf = 0.0;
    bool ok = true;
};

Solution solve(const Problem& p, const std::vector<double>& lambda, bool keep_inverse) {
    Solution s;
    s.theta.resize(ix(p.q), ix(p.K));
    s.rss = p.r_perp;
    for (std::size_t b = 0; b < p.K; ++b) {
        const MatrixXd S = penalty_block(p, lambda, b);
        const MatrixXd A = p.GtG + S;
        Eigen::LLT<MatrixXd> llt(A);
        if (!well_conditioned(llt, A)) {
            s.ok = false;
            return s;
        }
        const VectorXd yb = p.Yb.col(ix(b));
        const VectorXd th = llt.solve(p.Gc.transpose() * yb);
        s.theta.col(ix(b)) = th;
        s.rss += (yb - p.Gc * th).squaredNorm();
        s.pen += th.dot(S * th);
        s.log_det_a += 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        const MatrixXd ainv = llt.solve(MatrixXd::Identity(ix(p.q), ix(p.q)));
        s.edf += (ainv * p.GtG).trace();
        if (keep_inverse) s.ainv.push_back(ainv);
    }
    return s;
}

// Finds the term responsible for a singular penalized system: first a term that
// is unidentifiable on its own, otherwise the first term whose addition makes
// the system singular.
[[noreturn]] void report_rank_deficiency(const Problem& p, const std::vector<double>& lambda,
                                         const FunRegSpec& spec) {
    const auto names = spec.term_names();
    auto cols_of = [&](std::size_t t) {
        std::vector<Index> cols;
        if (t < p.L)
            for (std::size_t a = 0; a < p.K; ++a) cols.push_back(ix(t * p.K + a));
        else
            cols.push_back(ix(p.L * p.K + (t - p.L)));
        return cols;
    };
    auto singular = [&](const std::vector<Index>& cols) {
        for (std::size_t b = 0; b < p.K; ++b) {
            const MatrixXd full = p.GtG + penalty_block(p, lambda, b);
            MatrixXd A(ix(cols.size()), ix(cols.size()));
            for (std::size_t r = 0; r < cols.size(); ++r)
                for (std::size_t c = 0; c < cols.size(); ++c) A(ix(r), ix(c)) = full(cols[r], cols[c]);
            Eigen::LLT<MatrixXd> llt(A);
            if (!well_conditioned(llt, A)) return true;
        }
        return false;
    };
    for (std::size_t t = 0; t < names.size(); ++t)
        if (singular(cols_of(t)))
            throw NumericalError("fun-reg", "fit",
                                 "rank-deficient design after penalization: term '" + names[t] +
                                     "' is not identifiable (too few curves or a degenerate predictor)");
    std::vector<Index> acc;
    for (std::size_t t = 0; t < names.size(); ++t) {
        const auto c = cols_of(t);
        acc.insert(acc.end(), c.begin(), c.end());
        if (singular(acc))
            throw NumericalError("fun-reg", "fit",
                                 "rank-deficient design after penalization: term '" + names[t] +
                                     "' is collinear with the terms before it");
    }
    throw NumericalError("fun-reg", "fit", "rank-deficient design after penalization");
}

double reml_value(const Problem& p, const std::vector<double>& lambda) {
    const Solution s = solve(p, lambda, false);
    if (!s.ok) return std::numeric_limits<double>::infinity();
    const double dof = p.n_eff - static_cast<double>(p.null_dim);
    return dof * std::log(std::max(s.rss + s.pen, 1e-300)) + s.log_det_a - log_pdet_penalty(p, lambda);
}

struct RemlContext {
    const Problem* p;
    VectorXd base;
};

std::vector<double> to_lambda(const RemlContext& c, const gsl_vector* x) {
    std::vector<double> l(static_cast<std::size_t>(c.base.size()));
    for (std::size_t k = 0; k < l.size(); ++k) {
        const double rho = std::clamp(gsl_vector_get(x, k), -30.0, 30.0);
        l[k] = std::exp(c.base(ix(k)) + rho);
    }
    return l;
}

double reml_gsl(const gsl_vector* x, void* params) {
    const auto* c = static_cast<const RemlContext*>(params);
    return reml_value(*c->p, to_lambda(*c, x));
}

// Nelder-Mead on log smoothing parameters, offset from a trace-balanced start.
std::vector<double> select_lambdas(const Problem& p, std::size_t max_evaluations, double& reml_out) {
    const std::size_t m = 2 * p.L + p.J;
    RemlContext ctx{&p, VectorXd(ix(m))};
    for (std::size_t l = 0; l < p.L; ++l) {
        const double data = p.GtG.block(ix(l * p.K), ix(l * p.K), ix(p.K), ix(p.K)).trace();
        ctx.base(ix(2 * l)) = std::log(std::max(data, 1e-12) / p.Ps[l].trace());
        ctx.base(ix(2 * l + 1)) = std::log(std::max(data, 1e-12) / (p.Ms[l].trace() * p.d.maxCoeff()));
    }
    for (std::size_t j = 0; j < p.J; ++j) {
        const Index c = ix(p.L * p.K + j);
        ctx.base(ix(2 * p.L + j)) = std::log(p.GtG(c, c) / p.d.maxCoeff());
    }

    gsl_vector* x = gsl_vector_alloc(m);
    double best_shift = 0.0, best = std::numeric_limits<double>::infinity();
    for (double shift = -12.0; shift <= 12.0 + 1e-9; shift += 1.5) {
        gsl_vector_set_all(x, shift);
        const double v = reml_gsl(x, &ctx);
        if (v < best) {
            best = v;
            best_shift = shift;
        }
    }
    gsl_vector_set_all(x, best_shift);
    gsl_vector* step = gsl_vector_alloc(m);
    gsl_multimin_function f{&reml_gsl, m, &ctx};
    gsl_multimin_fminimizer* nm = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, m);
    std::size_t evaluations = 0;
    // Two passes: a fresh simplex around the first optimum guards against collapse.
    for (int pass = 0; pass < 2; ++pass) {
        gsl_vector_set_all(step, pass == 0 ? 2.0 : 0.5);
        gsl_multimin_fminimizer_set(nm, &f, x, step);
        for (;;) {
            if (gsl_multimin_fminimizer_iterate(nm) != GSL_SUCCESS) break;
            if (++evaluations >= max_evaluations) break;
            if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(nm), 1e-5) == GSL_SUCCESS) break;
        }
        gsl_vector_memcpy(x, gsl_multimin_fminimizer_x(nm));
    }
    reml_out = gsl_multimin_fminimizer_minimum(nm);
    auto lambda = to_lambda(ctx, x);
    gsl_multimin_fminimizer_free(nm);
    gsl_vector_free(step);
    gsl_vector_free(x);
    return lambda;
}

double integrated_ss(const MatrixXd& m, const VectorXd& w) {
    return (m.array().square().matrix() * w).sum();
}

}  // namespace

FunRegFit fit(const FunRegSpec& spec, const FunRegOptions& options) {
    validate(spec, options);
    const Problem p = prepare(spec, options);
    std::vector<double> lambda;
    double reml = std::numeric_limits<double>::quiet_NaN();
    const std::size_t m = 2 * p.L + p.J;
    if (options.lambdas) {
        lambda = *options.lambdas;
    } else if (m > 0) {
        const std::vector<double> unit(m, 1.0);
        if (!solve(p, unit, false).ok) report_rank_deficiency(p, unit, spec);
        lambda = select_lambdas(p, options.max_evaluations, reml);
    }
    const Solution s = solve(p, lambda, true);
    if (!s.ok) report_rank_deficiency(p, lambda, spec);

    FunRegFit out;
    for (const auto& f : spec.functional) out.functional_names.push_back(f.name);
    for (const auto& sc : spec.scalar) out.scalar_names.push_back(sc.name);
    out.region_names = spec.response.names();
    out.groups = p.group;
    out.lambdas = lambda;
    out.reml = reml;
    out.edf = s.edf;
    const double resid_dof = p.n_eff - s.edf;
    out.sigma2 = resid_dof > 0.0 ? s.rss / resid_dof : std::numeric_limits<double>::quiet_NaN();
    const double sigma2 = std::isfinite(out.sigma2) ? out.sigma2 : 0.0;

    const MatrixXd psi2 = p.psi.array().square();
    for (std::size_t l = 0; l < p.L; ++l) {
        const MatrixXd C = s.theta.middleRows(ix(l * p.K), ix(p.K));
        out.surfaces.push_back(p.Phi[l] * C * p.psi.transpose());
        MatrixXd v(ix(p.S[l]), ix(p.K));
        for (std::size_t b = 0; b < p.K; ++b) {
            const MatrixXd ab = s.ainv[b].block(ix(l * p.K), ix(l * p.K), ix(p.K), ix(p.K));
            v.col(ix(b)) = (p.Phi[l] * ab).cwiseProduct(p.Phi[l]).rowwise().sum();
        }
        out.surface_se.push_back((sigma2 * v * psi2.transpose()).cwiseMax(0.0).cwiseSqrt());
    }
    for (std::size_t j = 0; j < p.J; ++j) {
        const Index r = ix(p.L * p.K + j);
        const double sd = p.scalar_sd(ix(j));
        out.curves.push_back(p.psi * s.theta.row(r).transpose() / sd);
        VectorXd diag(ix(p.K));
        for (std::size_t b = 0; b < p.K; ++b) diag(ix(b)) = s.ainv[b](r, r);
        out.curve_se.push_back((sigma2 * psi2 * diag).cwiseMax(0.0).cwiseSqrt() / sd);
    }

    const MatrixXd& Y = spec.response.values();
    out.observed = Y;
    out.fitted = p.Gc * s.theta * p.psi.transpose();
    for (std::size_t i = 0; i < p.n; ++i) out.fitted.row(ix(i)) += p.y_group_mean.row(ix(p.group[i]));
    out.residuals = Y - out.fitted;

    out.intercepts = p.y_group_mean;
    for (std::size_t g = 0; g < p.G; ++g) {
        for (std::size_t l = 0; l < p.L; ++l) {
            const VectorXd xw = p.x_group_mean[l].row(ix(g)).transpose().cwiseProduct(p.ws[l]);
            out.intercepts.row(ix(g)) -= (out.surfaces[l].transpose() * xw).transpose();
        }
        for (std::size_t j = 0; j < p.J; ++j)
            out.intercepts.row(ix(g)) -= p.s_group_mean(ix(g), ix(j)) * out.curves[j].transpose();
    }
    out.r2 = r_squared(out);
    return out;
}

Eigen::VectorXd FunRegFit::predict(const std::vector<Eigen::VectorXd>& functional,
                                   const std::vector<double>& scalar, std::size_t group) const {
    if (functional.size() != surfaces.size() || scalar.size() != curves.size())
        throw ValidationError("prediction needs one value per model term");
    if (group >= static_cast<std::size_t>(intercepts.rows()))
        throw ValidationError("unknown group label " + std::to_string(group));
    VectorXd y = intercepts.row(ix(group)).transpose();
    for (std::size_t l = 0; l < surfaces.size(); ++l) {
        if (functional[l].size() != surfaces[l].rows())
            throw ValidationError("predictor '" + functional_names[l] + "' has the wrong length");
        const VectorXd xw = functional[l].cwiseProduct(trapezoid_weights(static_cast<std::size_t>(surfaces[l].rows())));
        y += surfaces[l].transpose() * xw;
    }
    for (std::size_t j = 0; j < curves.size(); ++j) y += scalar[j] * curves[j];
    return y;
}

std::size_t FunRegFit::scalar_index(const std::string& term) const {
    const auto it = std::find(scalar_names.begin(), scalar_names.end(), term);
    if (it == scalar_names.end()) throw ValidationError("'" + term + "' is not a scalar covariate term");
    return static_cast<std::size_t>(it - scalar_names.begin());
}

double r_squared(const FunRegFit& fit) {
    const VectorXd w = trapezoid_weights(static_cast<std::size_t>(fit.observed.cols()));
    const VectorXd mean = fit.observed.colwise().mean().transpose();
    const double ss_reg = integrated_ss(fit.fitted.rowwise() - mean.transpose(), w);
    const double ss_res = integrated_ss(fit.residuals, w);
    if (ss_reg + ss_res <= 0.0) return 0.0;
    return ss_reg / (ss_reg + ss_res);
}

double loocv_r_squared(const FunRegSpec& spec, const FunRegOptions& options) {
    validate(spec, options);
    const std::size_t n = spec.response.size();
    const MatrixXd& Y = spec.response.values();
    if (!spec.groups.empty()) {
        std::vector<std::size_t> count(spec.group_count(), 0);
        for (std::size_t g : spec.groups) ++count[g];
        for (std::size_t i = 0; i < n; ++i)
            if (count[spec.groups[i]] < 2)
                throw ValidationError("curve '" + spec.response.names()[i] +
                                      "' is the only member of its group; leave-one-out is undefined");
    }
    MatrixXd pred(Y.rows(), Y.cols());
    FunRegOptions inner = options;
    inner.threads = 1;
    parallel_for(n, options.threads, [&](std::size_t i) {
        std::vector<std::size_t> rows;
        for (std::size_t k = 0; k < n; ++k)
            if (k != i) rows.push_back(k);
        const FunRegFit f = fit(spec.subset(rows), inner);
        std::vector<VectorXd> xf;
        for (const auto& t : spec.functional) xf.push_back(t.values.curve(i));
        std::vector<double> xs;
        for (const auto& t : spec.scalar) xs.push_back(t.values(ix(i)));
        pred.row(ix(i)) = f.predict(xf, xs, spec.groups.empty() ? 0 : spec.groups[i]).transpose();
    });
    const VectorXd w = trapezoid_weights(spec.response.length());
    const VectorXd mean = Y.colwise().mean().transpose();
    const double ss_pred = integrated_ss(Y - pred, w);
    const double ss_tot = integrated_ss(Y.rowwise() - mean.transpose(), w);
    if (!(ss_tot > 0.0)) throw NumericalError("fun-reg", "loocv_r_squared", "response curves are all identical");
    return 1.0 - ss_pred / ss_tot;
}

double partial_r_squared(const FunRegSpec& spec, const std::string& term, const FunRegOptions& options) {
    const FunRegSpec reduced = spec.without(term);
    FunRegOptions reduced_options = options;
    if (options.lambdas) {
        std::vector<double> kept;
        for (std::size_t l = 0; l < spec.functional.size(); ++l)
            if (spec.functional[l].name != term) {
                kept.push_back((*options.lambdas)[2 * l]);
                kept.push_back((*options.lambdas)[2 * l + 1]);
            }
        for (std::size_t j = 0; j < spec.scalar.size(); ++j)
            if (spec.scalar[j].name != term) kept.push_back((*options.lambdas)[2 * spec.functional.size() + j]);
        reduced_options.lambdas = kept;
    }
    const double full = fit(spec, options).r2;
    const double red = fit(reduced, reduced_options).r2;
    if (1.0 - red < 1e-12)
        throw NumericalError("fun-reg", "partial_r_squared",
                             "reduced model without '" + term + "' already has R^2 = 1");
    return (full - red) / (1.0 - red);
}

std::vector<int> effect_sign_bands(const FunRegFit& fit, const std::string& term, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("band level must lie in (0, 1)");
    const std::size_t j = fit.scalar_index(term);
    const double z = gsl_cdf_ugaussian_Pinv(0.5 + 0.5 * level);
    const VectorXd& b = fit.curves[j];
    const VectorXd& se = fit.curve_se[j];
    std::vector<int> out(static_cast<std::size_t>(b.size()), 0);
    for (Index t = 0; t < b.size(); ++t) {
        if (b(t) - z * se(t) > 0.0) out[static_cast<std::size_t>(t)] = 1;
        else if (b(t) + z * se(t) < 0.0) out[static_cast<std::size_t>(t)] = -1;
    }
    return out;
}

}  // namespace fdepi
