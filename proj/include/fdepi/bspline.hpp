#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace fdepi {

// B-spline basis of a given order (4 = cubic) over strictly increasing
// breakpoints, with boundary knots repeated `order` times.
// Dimension = breaks + order - 2.
class BSplineBasis {
  public:
    BSplineBasis(std::vector<double> breaks, int order = 4);

    // Cubic basis with one knot per day on [0, length-1]; dimension length + 2.
    static BSplineBasis daily(std::size_t length);
    // Cubic basis of `dimension` functions with equally spaced knots on [lo, hi].
    static BSplineBasis uniform(double lo, double hi, std::size_t dimension);

    std::size_t dimension() const noexcept { return dimension_; }
    int order() const noexcept { return order_; }
    double lower() const noexcept { return breaks_.front(); }
    double upper() const noexcept { return breaks_.back(); }
    const std::vector<double>& breaks() const noexcept { return breaks_; }

    // Values (deriv = 0) or derivatives of every basis function at x.
    Eigen::VectorXd evaluate(double x, int deriv = 0) const;
    // Rows = points, columns = basis functions.
    Eigen::MatrixXd evaluate(const Eigen::VectorXd& points, int deriv = 0) const;

    // Gram matrix of the deriv-th derivatives, integrated exactly by
    // Gauss-Legendre on every knot interval.
    Eigen::MatrixXd penalty(int deriv = 2) const;

  private:
    std::size_t span(double x) const;

    std::vector<double> breaks_;
    std::vector<double> knots_;
    int order_;
    std::size_t dimension_;
};

}  // namespace fdepi
