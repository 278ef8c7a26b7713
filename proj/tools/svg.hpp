#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdepi/scalar.hpp"

namespace fdepi::plot {

struct Series {
    std::string label;
    Eigen::VectorXd y;
    std::string color = "#555555";
    bool dashed = false;
    double width = 1.0;
};

struct Band {
    Eigen::VectorXd lower, upper;
    std::string color = "#c6dbef";
};

// Curves against day index. Bands are drawn first, series on top.
std::string lines(const std::string& title, const std::vector<Series>& series,
                  const std::vector<Band>& bands = {}, const std::string& x_label = "day",
                  const std::string& y_label = "");

// Matrix as coloured cells with a diverging palette centred at `center`.
// Optional dendrograms along the rows (left) and columns (top); their leaf
// order then overrides the matrix order.
std::string heatmap(const std::string& title, const Eigen::MatrixXd& m, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels, const Dendrogram* row_tree = nullptr,
                    const Dendrogram* col_tree = nullptr, std::optional<double> center = 0.0);

// IWT adjusted p-values: day on x, scale on y (full scale at the top).
std::string pyramid(const std::string& title, const Eigen::MatrixXd& adjusted_p);

// Horizontal bars, one per label.
std::string bars(const std::string& title, const std::vector<std::string>& labels, const std::vector<double>& values);

// Group palette shared by every figure.
std::string group_color(std::size_t group);

}  // namespace fdepi::plot
