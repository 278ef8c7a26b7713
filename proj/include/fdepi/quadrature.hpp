#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "fdepi/dataset.hpp"

namespace fdepi {

// Trapezoid weights for `length` equally spaced samples with spacing `step`.
Eigen::VectorXd trapezoid_weights(std::size_t length, double step = 1.0);

// Trapezoidal integral of samples taken on an equally spaced grid.
double integrate(const Eigen::Ref<const Eigen::VectorXd>& samples, double step = 1.0);

// Trapezoidal integral over an arbitrary increasing abscissa.
double integrate(const Eigen::Ref<const Eigen::VectorXd>& samples,
                 const Eigen::Ref<const Eigen::VectorXd>& abscissae);

// Trapezoidal integral over a daily grid; sample count must match the grid.
double integrate(const Eigen::Ref<const Eigen::VectorXd>& samples, const TimeGrid& grid);

}  // namespace fdepi
