#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdepi/dataset.hpp"
#include "fdepi/funreg.hpp"
#include "fdepi/quadrature.hpp"
#include "fdepi/rng.hpp"

namespace fdepi::testing {

inline std::vector<std::string> curve_names(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("c" + std::to_string(1000 + i));
    return out;
}

// Random smooth curves: a constant plus ten sines with 1/k amplitudes.
inline Eigen::MatrixXd smooth_curves(Rng& rng, std::size_t n, std::size_t len) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(len));
    for (std::size_t i = 0; i < n; ++i) {
        double a[11];
        for (double& v : a) v = rng.normal();
        for (std::size_t s = 0; s < len; ++s) {
            double v = a[0];
            for (int k = 1; k <= 10; ++k)
                v += a[k] / k * std::sin(k * M_PI * (static_cast<double>(s) + 1.0) / (static_cast<double>(len) + 1.0));
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = v;
        }
    }
    return x;
}

inline Eigen::MatrixXd true_surface(std::size_t len) {
    Eigen::MatrixXd b(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(len));
    const double m = static_cast<double>(len - 1);
    for (std::size_t s = 0; s < len; ++s)
        for (std::size_t t = 0; t < len; ++t)
            b(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) =
                0.06 * std::sin(M_PI * s / m) * std::cos(M_PI * t / m) + 0.02 * (t / m);
    return b;
}

inline Eigen::VectorXd true_curve(std::size_t len) {
    Eigen::VectorXd b(static_cast<Eigen::Index>(len));
    for (std::size_t t = 0; t < len; ++t) b(static_cast<Eigen::Index>(t)) = std::sin(2.0 * M_PI * t / (len - 1.0));
    return b;
}

// y_i(t) = mu(t) + int beta(s,t) x_i(s) ds [+ b(t) z_i] + noise.
struct SyntheticRegression {
    FunRegSpec spec;
    Eigen::MatrixXd beta;
    Eigen::VectorXd curve;
};

inline SyntheticRegression synthetic_regression(std::uint64_t seed, std::size_t n, std::size_t len,
                                                double noise, bool with_scalar) {
    Rng rng(seed);
    const auto names = curve_names(n);
    const Eigen::MatrixXd x = smooth_curves(rng, n, len);
    const Eigen::MatrixXd beta = true_surface(len);
    const Eigen::VectorXd curve = true_curve(len);
    const Eigen::VectorXd w = trapezoid_weights(len);
    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    Eigen::MatrixXd y = x * w.asDiagonal() * beta;
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index t = 0; t < y.cols(); ++t) {
            y(i, t) += 0.5 + 0.01 * static_cast<double>(t) + noise * rng.normal();
            if (with_scalar) y(i, t) += curve(t) * z(i);
        }
    TimeGrid grid(len);
    FunRegSpec spec{FunctionalDataset(grid, names, y), {{"x", FunctionalDataset(grid, names, x)}}, {}, {}};
    if (with_scalar) spec.scalar.push_back({"z", z});
    return {spec, beta, curve};
}

}  // namespace fdepi::testing
