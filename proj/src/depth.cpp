#include "fdepi/depth.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "fdepi/error.hpp"

namespace fdepi {

namespace {

long long pairs(long long m) { return m * (m - 1) / 2; }

}  // namespace

std::vector<long long> band_counts(const Eigen::MatrixXd& values) {
    const auto n = values.rows();
    std::vector<long long> counts(static_cast<std::size_t>(n), 0);
    std::vector<double> sorted(static_cast<std::size_t>(n));
    for (Eigen::Index t = 0; t < values.cols(); ++t) {
        for (Eigen::Index i = 0; i < n; ++i) sorted[static_cast<std::size_t>(i)] = values(i, t);
        std::sort(sorted.begin(), sorted.end());
        for (Eigen::Index i = 0; i < n; ++i) {
            const double y = values(i, t);
            const auto below = std::lower_bound(sorted.begin(), sorted.end(), y) - sorted.begin();
            const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), y);
            // Pairs lying entirely below or entirely above do not contain y.
            counts[static_cast<std::size_t>(i)] += pairs(n) - pairs(below) - pairs(above);
        }
    }
    return counts;
}

std::vector<double> modified_band_depth(const FunctionalDataset& data) {
    if (data.size() < 3) throw ValidationError("band depth needs at least 3 curves, got " + std::to_string(data.size()));
    const auto counts = band_counts(data.values());
    const double denom = static_cast<double>(pairs(static_cast<long long>(data.size()))) * static_cast<double>(data.length());
    std::vector<double> depth(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) depth[i] = static_cast<double>(counts[i]) / denom;
    return depth;
}

bool DepthReport::is_outlier(std::size_t i) const { return std::find(outliers.begin(), outliers.end(), i) != outliers.end(); }

bool DepthReport::is_central(std::size_t i) const { return std::find(central.begin(), central.end(), i) != central.end(); }

DepthReport functional_boxplot(const FunctionalDataset& data) {
    if (data.size() < 4) throw ValidationError("functional boxplot needs at least 4 curves, got " + std::to_string(data.size()));
    DepthReport r;
    r.names = data.names();
    r.depths = modified_band_depth(data);
    const std::size_t n = data.size();
    r.depth_order.resize(n);
    std::iota(r.depth_order.begin(), r.depth_order.end(), 0);
    std::sort(r.depth_order.begin(), r.depth_order.end(), [&](std::size_t a, std::size_t b) {
        if (r.depths[a] != r.depths[b]) return r.depths[a] > r.depths[b];
        return r.names[a] < r.names[b];
    });
    r.median_index = r.depth_order.front();
    r.central.assign(r.depth_order.begin(), r.depth_order.begin() + static_cast<std::ptrdiff_t>((n + 1) / 2));

    const auto& y = data.values();
    const auto T = y.cols();
    r.central_lower = Eigen::VectorXd::Constant(T, std::numeric_limits<double>::infinity());
    r.central_upper = Eigen::VectorXd::Constant(T, -std::numeric_limits<double>::infinity());
    for (auto i : r.central) {
        r.central_lower = r.central_lower.cwiseMin(y.row(static_cast<Eigen::Index>(i)).transpose());
        r.central_upper = r.central_upper.cwiseMax(y.row(static_cast<Eigen::Index>(i)).transpose());
    }
    const Eigen::VectorXd range = r.central_upper - r.central_lower;
    r.fence_lower = r.central_lower - 1.5 * range;
    r.fence_upper = r.central_upper + 1.5 * range;
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd c = y.row(static_cast<Eigen::Index>(i)).transpose();
        if ((c.array() < r.fence_lower.array()).any() || (c.array() > r.fence_upper.array()).any()) r.outliers.push_back(i);
    }
    return r;
}

DepthReport signed_ranking(const FunctionalDataset& data) {
    DepthReport r = functional_boxplot(data);
    const std::size_t n = data.size();
    const auto& y = data.values();
    const auto T = static_cast<double>(y.cols());
    const Eigen::RowVectorXd median = y.row(static_cast<Eigen::Index>(r.median_index));
    r.above_share.assign(n, 0.0);
    r.signs.assign(n, 1);
    r.signed_depths.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (i == r.median_index) {
            r.above_share[i] = 1.0;  // fixed: the median takes sign +1
        } else {
            const auto above = ((y.row(static_cast<Eigen::Index>(i)) - median).array() > 0.0).count();
            r.above_share[i] = static_cast<double>(above) / T;
            if (2 * above == y.cols())
                r.warnings.push_back(r.names[i] + ": above the median on exactly half of the days; sign set to +1");
            r.signs[i] = 2 * above >= y.cols() ? 1 : -1;
        }
        r.signed_depths[i] = r.signs[i] * r.depths[i];
    }
    r.ranking.resize(n);
    std::iota(r.ranking.begin(), r.ranking.end(), 0);
    auto key = [&](std::size_t i) { return r.signs[i] * (1.0 - r.depths[i]); };
    std::sort(r.ranking.begin(), r.ranking.end(), [&](std::size_t a, std::size_t b) {
        if (key(a) != key(b)) return key(a) > key(b);
        return r.names[a] < r.names[b];
    });
    return r;
}

}  // namespace fdepi
