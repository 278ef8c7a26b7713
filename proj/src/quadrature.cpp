#include "fdepi/quadrature.hpp"

#include "fdepi/error.hpp"

namespace fdepi {

Eigen::VectorXd trapezoid_weights(std::size_t length, double step) {
    if (length < 2) throw ValidationError("trapezoid rule needs at least 2 samples");
    Eigen::VectorXd w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(length), step);
    w(0) *= 0.5;
    w(w.size() - 1) *= 0.5;
    return w;
}

double integrate(const Eigen::Ref<const Eigen::VectorXd>& samples, double step) {
    return trapezoid_weights(static_cast<std::size_t>(samples.size()), step).dot(samples);
}

double integrate(const Eigen::Ref<const Eigen::VectorXd>& samples, const Eigen::Ref<const Eigen::VectorXd>& abscissae) {
    if (samples.size() != abscissae.size())
        throw ValidationError("integrate: " + std::to_string(samples.size()) + " samples on a grid of " +
                              std::to_string(abscissae.size()) + " points");
    if (samples.size() < 2) throw ValidationError("trapezoid rule needs at least 2 samples");
    double total = 0.0;
    for (Eigen::Index i = 1; i < samples.size(); ++i)
        total += 0.5 * (abscissae(i) - abscissae(i - 1)) * (samples(i) + samples(i - 1));
    return total;
}

double integrate(const Eigen::Ref<const Eigen::VectorXd>& samples, const TimeGrid& grid) {
    if (static_cast<std::size_t>(samples.size()) != grid.length())
        throw ValidationError("integrate: " + std::to_string(samples.size()) + " samples on a grid of " +
                              std::to_string(grid.length()) + " days");
    return integrate(samples, 1.0);
}

}  // namespace fdepi
