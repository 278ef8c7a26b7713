#include <gtest/gtest.h>

#include "fdepi/error.hpp"
#include "fdepi/funreg.hpp"
#include "fdepi/quadrature.hpp"
#include "fdepi/rng.hpp"
#include "support/funreg_support.hpp"

using namespace fdepi;
using fdepi::testing::curve_names;
using fdepi::testing::smooth_curves;
using fdepi::testing::synthetic_regression;

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double integrated_error(const MatrixXd& a, const MatrixXd& b) {
    const VectorXd ws = trapezoid_weights(static_cast<std::size_t>(a.rows()));
    const VectorXd wt = trapezoid_weights(static_cast<std::size_t>(a.cols()));
    return ws.dot((a - b).array().square().matrix() * wt);
}

FunRegSpec scalar_only(std::uint64_t seed, std::size_t n, std::size_t T, double effect) {
    Rng rng(seed);
    VectorXd z(static_cast<Index>(n));
    for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    MatrixXd y(static_cast<Index>(n), static_cast<Index>(T));
    for (Index i = 0; i < y.rows(); ++i)
        for (Index t = 0; t < y.cols(); ++t)
            y(i, t) = 1.0 + 0.02 * static_cast<double>(t) + effect * z(i) + 0.5 * rng.normal();
    return FunRegSpec{FunctionalDataset(TimeGrid(T), curve_names(n), y), {}, {{"z", z}}, {}};
}

}  // namespace

TEST(FunReg, InterceptOnlyIsPointwiseMean) {
    Rng rng(3);
    const MatrixXd y = smooth_curves(rng, 9, 65);
    const FunRegSpec spec{FunctionalDataset(TimeGrid(65), curve_names(9), y), {}, {}, {}};
    const FunRegFit f = fit(spec);
    const VectorXd mean = y.colwise().mean().transpose();
    EXPECT_LT((f.intercepts.row(0).transpose() - mean).cwiseAbs().maxCoeff(), 1e-10);
    for (Index i = 0; i < y.rows(); ++i) EXPECT_LT((f.fitted.row(i).transpose() - mean).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(f.r2, 0.0, 1e-12);
}

// With as many basis functions as grid days and no penalty, every day is an
// unrestricted least-squares problem on the quadrature-weighted predictor values.
TEST(FunReg, SaturatedUnpenalizedMatchesDirectLeastSquares) {
    const std::size_t n = 14, T = 5;
    Rng rng(11);
    MatrixXd x(n, T), y(n, T);
    VectorXd z(n);
    for (Index i = 0; i < Index(n); ++i) {
        z(i) = 3.0 + 2.0 * rng.normal();
        for (Index t = 0; t < Index(T); ++t) x(i, t) = rng.normal();
        for (Index t = 0; t < Index(T); ++t) y(i, t) = rng.normal() + 0.3 * x(i, (t + 1) % T) - 0.2 * z(i);
    }
    const auto names = curve_names(n);
    FunRegSpec spec{FunctionalDataset(TimeGrid(T), names, y), {{"x", FunctionalDataset(TimeGrid(T), names, x)}},
                    {{"z", z}}, {}};
    FunRegOptions o;
    o.basis_dimension = 5;
    o.lambdas = std::vector<double>{0.0, 0.0, 0.0};
    const FunRegFit f = fit(spec, o);

    const VectorXd w = trapezoid_weights(T);
    for (Index t = 0; t < Index(T); ++t) {
        MatrixXd D(n, T + 2);
        D.col(0).setOnes();
        D.middleCols(1, T) = x;
        D.col(T + 1) = z;
        const VectorXd coef = D.colPivHouseholderQr().solve(y.col(t));
        EXPECT_NEAR(f.intercepts(0, t), coef(0), 1e-6);
        for (Index s = 0; s < Index(T); ++s) EXPECT_NEAR(f.surfaces[0](s, t), coef(1 + s) / w(s), 1e-6);
        EXPECT_NEAR(f.curves[0](t), coef(T + 1), 1e-6);
        const VectorXd fitted = D * coef;
        for (Index i = 0; i < Index(n); ++i) EXPECT_NEAR(f.fitted(i, t), fitted(i), 1e-6);
    }
}

// A single draw at n = 20 can beat one at n = 50, so the suite mean is the
// monotone quantity; the largest sample still wins seed by seed.
TEST(FunReg, SurfaceErrorShrinksWithSampleSize) {
    const std::vector<std::size_t> sizes{20, 50, 200};
    std::vector<double> mean(sizes.size(), 0.0);
    for (std::uint64_t seed = 21; seed <= 30; ++seed) {
        std::vector<double> ise;
        for (std::size_t n : sizes) {
            const auto data = synthetic_regression(seed, n, 65, 0.3, false);
            ise.push_back(integrated_error(fit(data.spec).surfaces[0], data.beta));
        }
        for (std::size_t k = 0; k < sizes.size(); ++k) mean[k] += ise[k] / 10.0;
        EXPECT_LT(ise.back(), ise.front()) << "seed " << seed;
    }
    EXPECT_LT(mean[1], mean[0]);
    EXPECT_LT(mean[2], mean[1]);
}

TEST(FunReg, NoiselessLinearDataFitsAlmostPerfectly) {
    const auto data = synthetic_regression(5, 30, 65, 0.0, true);
    const FunRegFit f = fit(data.spec);
    EXPECT_GE(f.r2, 0.999);
    EXPECT_GE(r_squared(f), 0.999);
}

TEST(FunReg, ResidualsSumToZeroWithFreeIntercept) {
    auto data = synthetic_regression(8, 24, 65, 0.4, true);
    const FunRegFit f = fit(data.spec);
    EXPECT_LT(f.residuals.colwise().sum().cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((f.observed - f.fitted - f.residuals).cwiseAbs().maxCoeff(), 1e-12);
    for (std::size_t i = 0; i < 24; ++i) data.spec.groups.push_back(i % 3 == 0 ? 1 : 0);
    const FunRegFit g = fit(data.spec);
    EXPECT_EQ(g.intercepts.rows(), 2);
    EXPECT_LT(g.residuals.colwise().sum().cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FunReg, SingleGroupLabelMatchesSharedIntercept) {
    auto data = synthetic_regression(9, 20, 65, 0.4, true);
    const FunRegFit a = fit(data.spec);
    data.spec.groups.assign(20, 0);
    const FunRegFit b = fit(data.spec);
    EXPECT_LT((a.surfaces[0] - b.surfaces[0]).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((a.curves[0] - b.curves[0]).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((a.intercepts - b.intercepts).cwiseAbs().maxCoeff(), 1e-8);
}

// Two groups that are copies of each other have the same group means as the
// pooled data, so per-group intercepts coincide with the shared one.
TEST(FunReg, DuplicatedGroupsMatchSharedIntercept) {
    const auto half = synthetic_regression(10, 12, 65, 0.4, true);
    const std::size_t n = 12;
    MatrixXd y(2 * n, 65), x(2 * n, 65);
    VectorXd z(2 * n);
    y << half.spec.response.values(), half.spec.response.values();
    x << half.spec.functional[0].values.values(), half.spec.functional[0].values.values();
    z << half.spec.scalar[0].values, half.spec.scalar[0].values;
    const auto names = curve_names(2 * n);
    FunRegSpec spec{FunctionalDataset(TimeGrid(65), names, y), {{"x", FunctionalDataset(TimeGrid(65), names, x)}},
                    {{"z", z}}, {}};
    FunRegOptions o;
    o.lambdas = std::vector<double>{2.0, 5.0, 0.5};
    const FunRegFit single = fit(spec, o);
    for (std::size_t i = 0; i < 2 * n; ++i) spec.groups.push_back(i < n ? 0 : 1);
    const FunRegFit grouped = fit(spec, o);
    EXPECT_LT((single.surfaces[0] - grouped.surfaces[0]).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((single.curves[0] - grouped.curves[0]).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((grouped.intercepts.row(0) - single.intercepts.row(0)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((grouped.intercepts.row(1) - single.intercepts.row(0)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FunReg, AffineRescalingOfScalarCovariate) {
    auto data = synthetic_regression(12, 20, 65, 0.4, true);
    const FunRegFit a = fit(data.spec);
    data.spec.scalar[0].values = -4.0 * data.spec.scalar[0].values.array() + 7.0;
    const FunRegFit b = fit(data.spec);
    EXPECT_LT((a.fitted - b.fitted).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((a.curves[0] + 4.0 * b.curves[0]).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((a.curve_se[0] - 4.0 * b.curve_se[0]).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FunReg, AddingTermNeverLowersR2WithFixedPenalties) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Rng rng(900 + seed);
        auto data = synthetic_regression(300 + seed, 20, 65, 0.5, true);
        VectorXd extra(20);
        for (Index i = 0; i < 20; ++i) extra(i) = rng.normal();
        const std::vector<double> base{std::exp(4.0 * rng.normal()), std::exp(4.0 * rng.normal()),
                                       std::exp(4.0 * rng.normal())};
        FunRegOptions o;
        o.lambdas = base;
        const double before = fit(data.spec, o).r2;
        data.spec.scalar.push_back({"extra", extra});
        auto more = base;
        more.push_back(std::exp(4.0 * rng.normal()));
        o.lambdas = more;
        const double after = fit(data.spec, o).r2;
        EXPECT_GE(after, before - 1e-12) << "seed " << seed;
    }
}

TEST(FunReg, NullTermHasSmallPartialR2) {
    auto data = synthetic_regression(41, 200, 65, 0.5, false);
    Rng rng(42);
    const Index n = 200;
    VectorXd z(n);
    for (Index i = 0; i < n; ++i) z(i) = rng.normal();
    // Remove the constant, the predictor's low-order moments and the
    // day-integrated response from z.
    const VectorXd w = trapezoid_weights(65);
    MatrixXd B(n, 4);
    const MatrixXd& x = data.spec.functional[0].values.values();
    const MatrixXd& y = data.spec.response.values();
    B.col(0).setOnes();
    B.col(1) = x * w;
    B.col(2) = x * (w.array() * VectorXd::LinSpaced(65, 0.0, 1.0).array()).matrix();
    B.col(3) = y * w;
    z -= B * B.colPivHouseholderQr().solve(z);
    data.spec.scalar.push_back({"null", z});
    const double pr = partial_r_squared(data.spec, "null");
    EXPECT_LE(pr, 0.05);
    EXPECT_GE(pr, -0.05);
}

TEST(FunReg, NullEffectBandsMostlyNonSignificant) {
    std::size_t nonsig = 0, total = 0;
    for (std::uint64_t r = 0; r < 200; ++r) {
        const FunRegSpec spec = scalar_only(500 + r, 20, 65, 0.0);
        const auto bands = effect_sign_bands(fit(spec), "z");
        for (int s : bands) {
            nonsig += s == 0;
            ++total;
        }
    }
    EXPECT_GE(static_cast<double>(nonsig) / static_cast<double>(total), 0.90);
}

TEST(FunReg, StrongEffectIsClassifiedByItsSign) {
    const auto pos = effect_sign_bands(fit(scalar_only(77, 20, 65, 1.0)), "z");
    for (int s : pos) EXPECT_EQ(s, 1);
    const auto neg = effect_sign_bands(fit(scalar_only(77, 20, 65, -1.0)), "z");
    for (int s : neg) EXPECT_EQ(s, -1);
    EXPECT_THROW(effect_sign_bands(fit(scalar_only(77, 20, 65, 1.0)), "x"), ValidationError);
}

// Predicting a held-out curve by the mean of the others inflates every
// deviation by n / (n - 1).
TEST(FunReg, InterceptOnlyLeaveOneOut) {
    Rng rng(6);
    const std::size_t n = 7;
    const FunRegSpec spec{FunctionalDataset(TimeGrid(65), curve_names(n), smooth_curves(rng, n, 65)), {}, {}, {}};
    const double ratio = static_cast<double>(n) / static_cast<double>(n - 1);
    EXPECT_NEAR(loocv_r_squared(spec), 1.0 - ratio * ratio, 1e-10);
}

TEST(FunReg, LeaveOneOutIsThreadCountIndependent) {
    const auto data = synthetic_regression(14, 16, 65, 0.4, true);
    FunRegOptions one, many;
    one.threads = 1;
    many.threads = 4;
    EXPECT_EQ(loocv_r_squared(data.spec, one), loocv_r_squared(data.spec, many));
}

TEST(FunReg, LeaveOneOutBelowInSample) {
    const auto data = synthetic_regression(15, 20, 65, 0.5, true);
    const double in = fit(data.spec).r2;
    const double loo = loocv_r_squared(data.spec);
    EXPECT_LT(loo, in);
    EXPECT_GT(loo, 0.0);
}

TEST(FunReg, PartialUndefinedWhenReducedModelIsExact) {
    MatrixXd y(6, 65);
    for (Index i = 0; i < 6; ++i)
        for (Index t = 0; t < 65; ++t) y(i, t) = i < 3 ? std::sin(0.1 * t) : std::cos(0.1 * t);
    VectorXd z(6);
    z << 1, 2, 4, 1, 3, 2;
    FunRegSpec spec{FunctionalDataset(TimeGrid(65), curve_names(6), y), {}, {{"z", z}}, {0, 0, 0, 1, 1, 1}};
    EXPECT_THROW(partial_r_squared(spec, "z"), NumericalError);
    EXPECT_THROW(partial_r_squared(spec, "missing"), ValidationError);
}

TEST(FunReg, RankDeficiencyNamesTheTerm) {
    auto data = synthetic_regression(16, 20, 65, 0.4, true);
    data.spec.scalar.push_back({"copy", 2.0 * data.spec.scalar[0].values});
    try {
        fit(data.spec);
        FAIL() << "expected a rank-deficiency error";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("'copy'"), std::string::npos) << e.what();
    }
    auto flat = synthetic_regression(17, 20, 65, 0.4, false);
    const auto names = flat.spec.response.names();
    flat.spec.functional.insert(flat.spec.functional.begin(),
                                {"dead", FunctionalDataset(TimeGrid(65), names, MatrixXd::Ones(20, 65))});
    try {
        fit(flat.spec);
        FAIL() << "expected a rank-deficiency error";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("'dead'"), std::string::npos) << e.what();
    }
}

TEST(FunReg, InputValidation) {
    auto data = synthetic_regression(18, 10, 65, 0.4, true);
    FunRegOptions o;
    o.lambdas = std::vector<double>{1.0};
    EXPECT_THROW(fit(data.spec, o), ValidationError);
    auto bad = data.spec;
    bad.scalar[0].values = VectorXd::Ones(10);
    EXPECT_THROW(fit(bad), ValidationError);
    bad = data.spec;
    bad.functional[0].values = data.spec.functional[0].values.subset({1, 0, 2, 3, 4, 5, 6, 7, 8, 9});
    EXPECT_THROW(fit(bad), ValidationError);
    bad = data.spec;
    bad.groups = {0, 0, 0, 0, 0, 2, 2, 2, 2, 2};
    EXPECT_THROW(fit(bad), ValidationError);
}
