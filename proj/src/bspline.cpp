#include "fdepi/bspline.hpp"

#include <algorithm>
#include <cmath>

#include "fdepi/error.hpp"

namespace fdepi {

BSplineBasis::BSplineBasis(std::vector<double> breaks, int order) : breaks_(std::move(breaks)), order_(order) {
    if (order_ < 1) throw ValidationError("B-spline order must be positive");
    if (breaks_.size() < 2) throw ValidationError("B-spline basis needs at least 2 breakpoints");
    for (std::size_t i = 1; i < breaks_.size(); ++i)
        if (!(breaks_[i] > breaks_[i - 1])) throw ValidationError("B-spline breakpoints must be increasing");
    knots_.assign(static_cast<std::size_t>(order_ - 1), breaks_.front());
    knots_.insert(knots_.end(), breaks_.begin(), breaks_.end());
    knots_.insert(knots_.end(), static_cast<std::size_t>(order_ - 1), breaks_.back());
    dimension_ = breaks_.size() + static_cast<std::size_t>(order_) - 2;
}

BSplineBasis BSplineBasis::daily(std::size_t length) {
    if (length < 4) throw ValidationError("insufficient grid for cubic basis");
    std::vector<double> breaks(length);
    for (std::size_t i = 0; i < length; ++i) breaks[i] = static_cast<double>(i);
    return BSplineBasis(std::move(breaks), 4);
}

BSplineBasis BSplineBasis::uniform(double lo, double hi, std::size_t dimension) {
    if (dimension < 4) throw ValidationError("cubic basis needs dimension >= 4");
    const std::size_t nbreaks = dimension - 2;
    std::vector<double> breaks(nbreaks);
    for (std::size_t i = 0; i < nbreaks; ++i)
        breaks[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(nbreaks - 1);
    return BSplineBasis(std::move(breaks), 4);
}

// Index j of the knot interval [t_j, t_{j+1}) holding x; the right end of the
// domain belongs to the last non-degenerate interval.
std::size_t BSplineBasis::span(double x) const {
    const std::size_t first = static_cast<std::size_t>(order_ - 1);
    const std::size_t last = knots_.size() - static_cast<std::size_t>(order_) - 1;
    if (x <= knots_[first]) return first;
    if (x >= knots_[last + 1]) return last;
    auto it = std::upper_bound(knots_.begin() + static_cast<long>(first), knots_.begin() + static_cast<long>(last + 2), x);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
}

namespace {

// Values of all B-splines of order `k` (or their deriv-th derivative) at x,
// given the active interval j. Result has knots.size() - k entries.
Eigen::VectorXd bspline_values(const std::vector<double>& knots, std::size_t j, double x, int k, int deriv) {
    const auto count = static_cast<Eigen::Index>(knots.size()) - k;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(count);
    if (deriv >= k) return out;
    if (k == 1) {
        out(static_cast<Eigen::Index>(j)) = 1.0;
        return out;
    }
    const Eigen::VectorXd lower = bspline_values(knots, j, x, k - 1, deriv > 0 ? deriv - 1 : 0);
    for (Eigen::Index i = 0; i < count; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const double left_den = knots[ui + static_cast<std::size_t>(k) - 1] - knots[ui];
        const double right_den = knots[ui + static_cast<std::size_t>(k)] - knots[ui + 1];
        double v = 0.0;
        if (deriv > 0) {
            if (left_den > 0) v += (k - 1) * lower(i) / left_den;
            if (right_den > 0) v -= (k - 1) * lower(i + 1) / right_den;
        } else {
            if (left_den > 0) v += (x - knots[ui]) / left_den * lower(i);
            if (right_den > 0) v += (knots[ui + static_cast<std::size_t>(k)] - x) / right_den * lower(i + 1);
        }
        out(i) = v;
    }
    return out;
}

}  // namespace

Eigen::VectorXd BSplineBasis::evaluate(double x, int deriv) const {
    if (deriv < 0) throw ValidationError("derivative order must be non-negative");
    return bspline_values(knots_, span(x), x, order_, deriv);
}

Eigen::MatrixXd BSplineBasis::evaluate(const Eigen::VectorXd& points, int deriv) const {
    Eigen::MatrixXd m(points.size(), static_cast<Eigen::Index>(dimension_));
    for (Eigen::Index r = 0; r < points.size(); ++r) m.row(r) = evaluate(points(r), deriv).transpose();
    return m;
}

Eigen::MatrixXd BSplineBasis::penalty(int deriv) const {
    static const double nodes[] = {-0.7745966692414834, 0.0, 0.7745966692414834};
    static const double weights[] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const auto dim = static_cast<Eigen::Index>(dimension_);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
    // Products of derivatives of degree order-1-deriv; three nodes are exact up to degree 5.
    for (std::size_t b = 0; b + 1 < breaks_.size(); ++b) {
        const double half = 0.5 * (breaks_[b + 1] - breaks_[b]);
        const double mid = 0.5 * (breaks_[b + 1] + breaks_[b]);
        for (int q = 0; q < 3; ++q) {
            const Eigen::VectorXd d = evaluate(mid + half * nodes[q], deriv);
            gram.noalias() += (half * weights[q]) * d * d.transpose();
        }
    }
    return 0.5 * (gram + gram.transpose());
}

}  // namespace fdepi
