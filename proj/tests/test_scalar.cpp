#include <gtest/gtest.h>

#include <set>

#include "fdepi/error.hpp"
#include "fdepi/rng.hpp"
#include "fdepi/scalar.hpp"

using namespace fdepi;

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<std::string> labels(std::size_t n, const std::string& prefix = "v") {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

MatrixXd gaussian(std::uint64_t seed, Index rows, Index cols) {
    Rng rng(seed);
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

// Sylvester Hadamard matrix of order 2^k.
MatrixXd hadamard(int k) {
    MatrixXd h = MatrixXd::Ones(1, 1);
    for (int s = 0; s < k; ++s) {
        MatrixXd next(2 * h.rows(), 2 * h.cols());
        next << h, h, h, -h;
        h = next;
    }
    return h;
}

// Leaves under a merge operand.
std::set<std::size_t> leaves_of(const Dendrogram& d, int operand) {
    if (operand < 0) return {static_cast<std::size_t>(-operand - 1)};
    auto a = leaves_of(d, d.merge[static_cast<std::size_t>(operand - 1)][0]);
    const auto b = leaves_of(d, d.merge[static_cast<std::size_t>(operand - 1)][1]);
    a.insert(b.begin(), b.end());
    return a;
}

// Two constant-column blocks on rows 0-7 x cols 0-4 and rows 8-15 x cols 5-9
// of a 20 x 12 Gaussian background.
MatrixXd planted_blocks(std::uint64_t seed) {
    Rng rng(seed);
    MatrixXd m = gaussian(seed + 1000, 20, 12);
    for (Index j = 0; j < 5; ++j) {
        const double level = rng.normal();
        for (Index i = 0; i < 8; ++i) m(i, j) = level + 0.01 * rng.normal();
    }
    for (Index j = 5; j < 10; ++j) {
        const double level = rng.normal();
        for (Index i = 8; i < 16; ++i) m(i, j) = level + 0.01 * rng.normal();
    }
    return standardize_columns(m, labels(12));
}

std::vector<std::size_t> range(std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> out;
    for (std::size_t i = lo; i < hi; ++i) out.push_back(i);
    return out;
}

}  // namespace

TEST(Standardize, UnitSdAndConstantColumnError) {
    const MatrixXd z = standardize_columns(gaussian(1, 10, 3), labels(3));
    for (Index j = 0; j < 3; ++j) {
        EXPECT_NEAR(z.col(j).mean(), 0.0, 1e-12);
        EXPECT_NEAR(z.col(j).squaredNorm() / 9.0, 1.0, 1e-12);
    }
    MatrixXd m = gaussian(2, 5, 2);
    m.col(1).setConstant(4.0);
    try {
        standardize_columns(m, {"a", "flat"});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("flat"), std::string::npos);
    }
}

TEST(HCluster, CorrelatedPairMergesFirstAndAnticorrelatedDistanceIsTwo) {
    MatrixXd m = gaussian(3, 12, 4);
    m.col(3) = 2.5 * m.col(0).array() + 1.0;
    const Dendrogram d = hcluster(m, Axis::columns, labels(4));
    EXPECT_NEAR(d.heights[0], 0.0, 1e-12);
    EXPECT_EQ(d.merge[0][0], -1);
    EXPECT_EQ(d.merge[0][1], -4);

    MatrixXd pair(2, 5);
    pair << 1, 2, 3, 4, 6, -1, -2, -3, -4, -6;
    EXPECT_NEAR(correlation_distance(pair, {"a", "b"})(0, 1), 2.0, 1e-12);
}

TEST(HCluster, MergeHeightsAreCompleteLinkageAndMonotone) {
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        const MatrixXd m = gaussian(seed, 9, 15);
        const auto names = labels(9);
        const MatrixXd dist = correlation_distance(m, names);
        const Dendrogram d = hcluster(m, Axis::rows, names);
        ASSERT_EQ(d.merge.size(), 8u);
        std::set<std::size_t> order(d.order.begin(), d.order.end());
        EXPECT_EQ(order.size(), 9u);
        for (std::size_t k = 0; k < d.merge.size(); ++k) {
            if (k > 0) EXPECT_GE(d.heights[k], d.heights[k - 1] - 1e-15);
            const auto a = leaves_of(d, d.merge[k][0]);
            const auto b = leaves_of(d, d.merge[k][1]);
            double worst = 0.0;
            for (std::size_t i : a)
                for (std::size_t j : b) worst = std::max(worst, dist(Index(i), Index(j)));
            EXPECT_NEAR(d.heights[k], worst, 1e-12);
        }
    }
}

TEST(HCluster, InvariantToPositiveAffineRescaling) {
    const MatrixXd m = gaussian(30, 10, 6);
    MatrixXd scaled = m;
    for (Index j = 0; j < 6; ++j) scaled.col(j) = (0.5 + j) * m.col(j).array() + 3.0 * j;
    const Dendrogram a = hcluster(m, Axis::columns, labels(6));
    const Dendrogram b = hcluster(scaled, Axis::columns, labels(6));
    EXPECT_EQ(a.merge, b.merge);
    for (std::size_t k = 0; k < a.heights.size(); ++k) EXPECT_NEAR(a.heights[k], b.heights[k], 1e-12);
}

TEST(HCluster, ConstantItemIsNamed) {
    MatrixXd m = gaussian(4, 3, 6);
    m.row(2).setConstant(1.0);
    try {
        hcluster(m, Axis::rows, {"a", "b", "still"});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("still"), std::string::npos);
    }
    EXPECT_THROW(hcluster(MatrixXd::Ones(1, 3), Axis::rows, {"a"}), ValidationError);
}

TEST(HScore, HandExamples) {
    MatrixXd m(2, 2);
    m << 0, 0, 1, 1;
    EXPECT_DOUBLE_EQ(h_score(m, {0, 1}, {0, 1}), 0.25);
    EXPECT_DOUBLE_EQ(h_correction(2, 2), 1.0);
    EXPECT_DOUBLE_EQ(adjusted_h_score(m, {0, 1}, {0, 1}), 0.25);
    MatrixXd c(3, 2);
    c << 1, 5, 1, 5, 1, 5;
    EXPECT_EQ(h_score(c, {0, 1, 2}, {0, 1}), 0.0);
    EXPECT_EQ(adjusted_h_score(c, {0, 1, 2}, {0, 1}), 0.0);
    EXPECT_THROW(h_score(m, {}, {0}), ValidationError);
    EXPECT_THROW(h_score(m, {0}, {2}), ValidationError);
}

TEST(HScore, CorrectionMatchesProductFormAndIsAtLeastOne) {
    for (std::size_t rows = 1; rows <= 40; ++rows)
        for (std::size_t cols = 1; cols <= 40; ++cols) {
            double product = 1.0;
            for (std::size_t r = 2; r + 1 <= rows; ++r) product *= double(r * r) / double(r * r - 1);
            for (std::size_t q = 2; q + 1 <= cols; ++q) product *= double(q * q) / double(q * q - 1);
            EXPECT_NEAR(h_correction(rows, cols), product, 1e-12 * product);
            EXPECT_GE(h_correction(rows, cols), 1.0);
            if (rows <= 2 && cols <= 2) EXPECT_EQ(h_correction(rows, cols), 1.0);
            else EXPECT_GT(h_correction(rows, cols), 1.0);
        }
}

bool recovered_both(std::uint64_t seed, MaskMode mask = MaskMode::random_normal) {
    ChengChurchOptions o;
    o.delta = 3e-4;
    o.mask = mask;
    const auto found = cheng_church(planted_blocks(seed), o);
    std::set<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> got;
    for (const auto& b : found) got.insert({b.rows, b.cols});
    return found.size() == 2 && got.count({range(0, 8), range(0, 5)}) && got.count({range(8, 16), range(5, 10)});
}

TEST(ChengChurch, RecoversPlantedBlocks) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) EXPECT_TRUE(recovered_both(seed)) << "seed " << seed;
}

// Greedy deletion sometimes strips block rows whose column levels sit far from
// the background means before the background goes; the miss rate stays modest.
TEST(ChengChurch, PlantedRecoveryRate) {
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) hits += recovered_both(seed);
    EXPECT_GE(hits, 80);
}

// Refilling found cells with column means leaves a constant-column block
// behind, which the next search finds again.
TEST(ChengChurch, ColumnMeanMaskingRediscoversBlocks) {
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) hits += recovered_both(seed, MaskMode::column_mean);
    EXPECT_LT(hits, 20);
}

TEST(ChengChurch, HugeDeltaReturnsWholeMatrix) {
    ChengChurchOptions o;
    o.delta = 1e9;
    o.max_biclusters = 1;
    const auto found = cheng_church(standardize_columns(gaussian(5, 8, 5), labels(5)), o);
    ASSERT_EQ(found.size(), 1u);
    EXPECT_EQ(found[0].rows, range(0, 8));
    EXPECT_EQ(found[0].cols, range(0, 5));
}

TEST(ChengChurch, EveryBiclusterRespectsDelta) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        ChengChurchOptions o;
        o.delta = 0.02 + 0.5 * rng.uniform();
        o.max_biclusters = 4;
        o.mask = seed % 2 ? MaskMode::column_mean : MaskMode::random_normal;
        const MatrixXd z = standardize_columns(gaussian(100 + seed, 20, 12), labels(12));
        for (const auto& b : cheng_church(z, o)) {
            EXPECT_LE(b.adjusted_h_score, o.delta);
            EXPECT_GE(b.rows.size(), 2u);
            EXPECT_GE(b.cols.size(), 2u);
            EXPECT_NEAR(b.adjusted_h_score, b.h_score / h_correction(b.rows.size(), b.cols.size()), 1e-15);
        }
    }
}

TEST(ChengChurch, NothingUnderTinyDeltaOnNoise) {
    ChengChurchOptions o;
    o.delta = 1e-9;
    EXPECT_TRUE(cheng_church(standardize_columns(gaussian(7, 20, 12), labels(12)), o).empty());
    o.delta = 0.0;
    EXPECT_THROW(cheng_church(MatrixXd::Ones(3, 3), o), ValidationError);
}

TEST(ChengChurch, MaskingIsSeeded) {
    ChengChurchOptions o;
    o.delta = 0.3;
    o.max_biclusters = 3;
    const MatrixXd z = standardize_columns(gaussian(8, 20, 12), labels(12));
    const auto a = cheng_church(z, o);
    const auto b = cheng_church(z, o);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].rows, b[k].rows);
        EXPECT_EQ(a[k].cols, b[k].cols);
    }
}

TEST(ChengChurch, TuningRecoversTheDeltaBehindKnownScores) {
    const MatrixXd z = standardize_columns(gaussian(9, 20, 12), labels(12));
    ChengChurchOptions o;
    o.delta = 0.25;
    const auto reference = cheng_church(z, o);
    ASSERT_EQ(reference.size(), 2u);
    const DeltaTuning t = tune_delta(z, {reference[0].adjusted_h_score, reference[1].adjusted_h_score}, o);
    EXPECT_LT(t.loss, 1e-12);
    ASSERT_EQ(t.biclusters.size(), 2u);
    EXPECT_NEAR(t.biclusters[0].adjusted_h_score, reference[0].adjusted_h_score, 1e-12);
}

TEST(Pca, IdenticalColumnsGiveOneComponent) {
    MatrixXd m = gaussian(11, 15, 2);
    m.col(1) = 3.0 * m.col(0).array() - 2.0;
    const PcaResult p = pca(m, labels(2));
    EXPECT_NEAR(p.explained(0), 1.0, 1e-12);
    EXPECT_NEAR(p.explained(1), 0.0, 1e-12);
}

TEST(Pca, OrthogonalColumnsAreIsotropic) {
    const MatrixXd h = hadamard(3).rightCols(5);
    const PcaResult p = pca(h, labels(5));
    for (Index k = 0; k < 5; ++k) EXPECT_NEAR(p.explained(k), 0.2, 1e-12);
}

TEST(Pca, ScoresCenteredLoadingsOrthonormalSignFixed) {
    for (std::uint64_t seed = 40; seed < 50; ++seed) {
        MatrixXd m = gaussian(seed, 20, 5);
        m.col(1) += 0.8 * m.col(0);
        const PcaResult p = pca(m, labels(5));
        EXPECT_LT((p.loadings.transpose() * p.loadings - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT(p.scores.colwise().mean().cwiseAbs().maxCoeff(), 1e-10);
        for (Index k = 0; k < 5; ++k) EXPECT_GE(p.loadings(0, k), 0.0);
        for (Index k = 1; k < 5; ++k) EXPECT_GE(p.variances(k - 1), p.variances(k));
        EXPECT_NEAR(p.explained.sum(), 1.0, 1e-12);
        // Score variances equal the eigenvalues.
        for (Index k = 0; k < 5; ++k) EXPECT_NEAR(p.scores.col(k).squaredNorm() / 19.0, p.variances(k), 1e-10);
    }
    MatrixXd flat = gaussian(1, 6, 3);
    flat.col(2).setZero();
    EXPECT_THROW(pca(flat, labels(3)), ValidationError);
}

TEST(Vif, OrthogonalDesignGivesOne) {
    const MatrixXd h = hadamard(3).rightCols(6);
    const VectorXd v = vif(h, labels(6));
    for (Index j = 0; j < 6; ++j) EXPECT_NEAR(v(j), 1.0, 1e-12);
}

TEST(Vif, MatchesInverseCorrelationDiagonal) {
    for (std::uint64_t seed = 60; seed < 70; ++seed) {
        MatrixXd m = gaussian(seed, 20, 6);
        m.col(2) += 0.9 * m.col(0) - 0.4 * m.col(1);
        const VectorXd v = vif(m, labels(6));
        const MatrixXd z = standardize_columns(m, labels(6));
        const MatrixXd corr = z.transpose() * z / 19.0;
        const VectorXd oracle = corr.inverse().diagonal();
        for (Index j = 0; j < 6; ++j) {
            EXPECT_NEAR(v(j), oracle(j), 1e-9 * oracle(j));
            EXPECT_GE(v(j), 1.0);
        }
    }
}

TEST(Vif, DuplicateColumnIsInfinite) {
    MatrixXd m(20, 4);
    m.leftCols(3) = gaussian(71, 20, 3);
    m.col(3) = m.col(1);
    const VectorXd v = vif(m, labels(4));
    EXPECT_TRUE(std::isinf(v(1)));
    EXPECT_TRUE(std::isinf(v(3)));
    EXPECT_TRUE(std::isfinite(v(0)));
    EXPECT_THROW(vif(gaussian(1, 4, 4), labels(4)), ValidationError);
}
