#include <cmath>

#include <gtest/gtest.h>

#include "fdepi/bspline.hpp"
#include "fdepi/error.hpp"
#include "fdepi/quadrature.hpp"
#include "fdepi/rng.hpp"
#include "fdepi/smoothing.hpp"

using namespace fdepi;

namespace {

FunctionalDataset make_dataset(const Eigen::MatrixXd& values) {
    std::vector<std::string> names;
    for (Eigen::Index i = 0; i < values.rows(); ++i) names.push_back("c" + std::to_string(i));
    return FunctionalDataset(TimeGrid(static_cast<std::size_t>(values.cols())), names, values);
}

Eigen::MatrixXd cubic_curves(std::size_t n, std::size_t len, Rng& rng) {
    Eigen::MatrixXd y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(len));
    for (std::size_t i = 0; i < n; ++i) {
        const double a = rng.normal(), b = rng.normal(), c = rng.normal(), d = rng.normal();
        for (std::size_t t = 0; t < len; ++t) {
            const double x = static_cast<double>(t) / static_cast<double>(len - 1);
            y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = a + b * x + c * x * x + d * x * x * x;
        }
    }
    return y;
}

}  // namespace

TEST(BuildBasis, DimensionIsGridLengthPlusTwo) {
    EXPECT_EQ(build_basis(TimeGrid(75)).dimension(), 77u);
    EXPECT_EQ(build_basis(TimeGrid(4)).dimension(), 6u);
}

TEST(BuildBasis, RejectsGridsTooShortForCubic) {
    try {
        build_basis(TimeGrid(3));
        FAIL() << "expected an error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("insufficient grid for cubic basis"), std::string::npos);
    }
}

TEST(BSplineBasis, PartitionOfUnityAndDerivativesAgainstFiniteDifferences) {
    const auto basis = BSplineBasis::daily(12);
    for (double x = 0.0; x <= 11.0; x += 0.37) {
        EXPECT_NEAR(basis.evaluate(x).sum(), 1.0, 1e-12);
        const double h = 1e-5;
        if (x - h < 0 || x + h > 11) continue;
        const Eigen::VectorXd fd = (basis.evaluate(x + h) - basis.evaluate(x - h)) / (2 * h);
        EXPECT_LT((fd - basis.evaluate(x, 1)).cwiseAbs().maxCoeff(), 1e-6);
    }
    EXPECT_NEAR(basis.evaluate(11.0).sum(), 1.0, 1e-12);
}

TEST(BSplineBasis, RoughnessPenaltyIsPsdWithLinearNullSpace) {
    const auto basis = BSplineBasis::daily(20);
    const Eigen::MatrixXd r = basis.penalty(2);
    EXPECT_LT((r - r.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r);
    EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-10);
    EXPECT_LT(std::abs(eig.eigenvalues()(1)), 1e-9);
    EXPECT_GT(eig.eigenvalues()(2), 1e-6);
}

TEST(Smooth, ZeroLambdaInterpolatesCubicData) {
    Rng rng(11);
    const auto data = make_dataset(cubic_curves(5, 30, rng));
    const auto model = smooth(data, 0.0);
    EXPECT_LT((model.fitted().values() - data.values()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Smooth, HugeLambdaGivesLeastSquaresLine) {
    Rng rng(3);
    Eigen::MatrixXd y(3, 40);
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index t = 0; t < y.cols(); ++t) y(i, t) = std::sin(0.3 * static_cast<double>(t)) + rng.normal();
    const auto data = make_dataset(y);
    const auto model = smooth(data, 1e12);
    const Eigen::VectorXd t = data.grid().abscissae();
    Eigen::MatrixXd design(t.size(), 2);
    design.col(0).setOnes();
    design.col(1) = t;
    const auto fitted = model.fitted().values();
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(y.row(i).transpose());
        const Eigen::VectorXd line = design * beta;
        EXPECT_LT((fitted.row(i).transpose() - line).cwiseAbs().maxCoeff(), 1e-4);
        double sup = 0.0;
        for (double x = 0.0; x <= 39.0; x += 0.25)
            sup = std::max(sup, std::abs(model.evaluate(static_cast<std::size_t>(i), x, 2)));
        EXPECT_LT(sup, 1e-6);
    }
}

TEST(Smooth, RejectsNegativeLambda) {
    Rng rng(1);
    const auto data = make_dataset(cubic_curves(2, 10, rng));
    EXPECT_THROW(smooth(data, -1.0), ValidationError);
}

TEST(Smooth, GcvSmoothingReducesErrorOnNoisySinusoids) {
    Rng rng(2024);
    const Eigen::Index n = 20, len = 75;
    Eigen::MatrixXd truth(n, len), noisy(n, len);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double amp = 1.0 + 0.5 * rng.uniform();
        const double phase = 2 * M_PI * rng.uniform();
        for (Eigen::Index t = 0; t < len; ++t) {
            truth(i, t) = amp * std::sin(2 * M_PI * static_cast<double>(t) / 40.0 + phase);
            noisy(i, t) = truth(i, t) + 0.3 * rng.normal();
        }
    }
    const auto data = make_dataset(noisy);
    const auto sel = select_lambda(data, default_lambda_grid());
    const Eigen::MatrixXd fitted = sel.model.fitted().values();
    double mise_raw = 0.0, mise_fit = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        mise_raw += integrate(Eigen::VectorXd((noisy.row(i) - truth.row(i)).array().square()));
        mise_fit += integrate(Eigen::VectorXd((fitted.row(i) - truth.row(i)).array().square()));
    }
    EXPECT_GE(mise_raw / mise_fit, 2.0);
}

TEST(SelectLambda, SingletonGridReturnsItsValue) {
    Rng rng(5);
    const auto data = make_dataset(cubic_curves(4, 20, rng) + 0.1 * Eigen::MatrixXd::Random(4, 20));
    EXPECT_EQ(select_lambda(data, {1.0}).lambda, 1.0);
}

TEST(SelectLambda, WhiteNoisePicksMaximalSmoothing) {
    Rng rng(8);
    Eigen::MatrixXd y(20, 75);
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index t = 0; t < y.cols(); ++t) y(i, t) = rng.normal();
    const auto grid = default_lambda_grid();
    EXPECT_EQ(select_lambda(make_dataset(y), grid).lambda, grid.back());
}

TEST(SelectLambda, NoiselessCubicsPickMinimalSmoothing) {
    Rng rng(9);
    const auto grid = default_lambda_grid();
    EXPECT_EQ(select_lambda(make_dataset(cubic_curves(20, 75, rng)), grid).lambda, grid.front());
}

TEST(SelectLambda, InterpolatingCandidateIsSkippedWithWarning) {
    Rng rng(10);
    const auto sel = select_lambda(make_dataset(cubic_curves(3, 15, rng) + Eigen::MatrixXd::Random(3, 15)), {0.0, 1.0});
    EXPECT_EQ(sel.lambda, 1.0);
    EXPECT_EQ(sel.warnings.size(), 1u);
    EXPECT_TRUE(std::isnan(sel.mean_gcv[0]));
}

TEST(SmootherMatrix, SymmetricWithEigenvaluesInUnitInterval) {
    const SmootherSpectrum spectrum(TimeGrid(40));
    for (double lambda : {0.0, 1e-4, 0.1, 1.0, 100.0, 1e6, 1e10}) {
        const Eigen::MatrixXd s = spectrum.smoother_matrix(lambda);
        EXPECT_LT((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-10);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (s + s.transpose()));
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
        EXPECT_LE(eig.eigenvalues().maxCoeff(), 1.0 + 1e-10);
    }
}

TEST(SmootherMatrix, EffectiveDegreesOfFreedomStrictlyDecrease) {
    const SmootherSpectrum spectrum(TimeGrid(75));
    const auto grid = default_lambda_grid();
    double previous = spectrum.trace(0.0);
    EXPECT_NEAR(previous, 75.0, 1e-8);
    for (double lambda : grid) {
        const double tr = spectrum.trace(lambda);
        EXPECT_LT(tr, previous);
        previous = tr;
    }
    EXPECT_GT(previous, 2.0 - 1e-6);
}

TEST(Smooth, AffineEquivariance) {
    Rng rng(77);
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::MatrixXd y(3, 25);
        for (Eigen::Index i = 0; i < y.rows(); ++i)
            for (Eigen::Index t = 0; t < y.cols(); ++t) y(i, t) = rng.normal();
        const double a = 4 * rng.uniform() - 2, b = 10 * rng.normal();
        const double lambda = std::pow(10.0, 6 * rng.uniform() - 3);
        const auto base = smooth(make_dataset(y), lambda).fitted().values();
        const Eigen::MatrixXd shifted = (a * y.array() + b).matrix();
        const auto moved = smooth(make_dataset(shifted), lambda).fitted().values();
        EXPECT_LT((moved - (a * base.array() + b).matrix()).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Integrate, KnownValues) {
    EXPECT_DOUBLE_EQ(integrate(Eigen::VectorXd::Ones(65), TimeGrid(65)), 64.0);
    EXPECT_NEAR(integrate(Eigen::VectorXd::LinSpaced(65, 0.0, 1.0), TimeGrid(65)), 32.0, 1e-12);
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(1000, 0.0, 2 * M_PI);
    EXPECT_NEAR(integrate(Eigen::VectorXd(x.array().sin()), x), 0.0, 1e-4);
}

TEST(Integrate, LengthMismatchIsAnError) {
    EXPECT_THROW(integrate(Eigen::VectorXd::Ones(10), TimeGrid(11)), ValidationError);
    EXPECT_THROW(integrate(Eigen::VectorXd::Ones(10), Eigen::VectorXd::LinSpaced(9, 0, 1)), ValidationError);
}

TEST(Integrate, AdditiveOverRandomSamples) {
    Rng rng(123);
    for (int rep = 0; rep < 50; ++rep) {
        const auto len = static_cast<Eigen::Index>(2 + rng.below(200));
        Eigen::VectorXd f(len), g(len);
        for (Eigen::Index i = 0; i < len; ++i) {
            f(i) = rng.normal();
            g(i) = 100 * rng.normal();
        }
        EXPECT_NEAR(integrate(Eigen::VectorXd(f + g)), integrate(f) + integrate(g), 1e-10);
    }
}
