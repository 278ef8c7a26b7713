#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fdepi {

using Date = std::chrono::year_month_day;

Date parse_iso_date(std::string_view text);
std::string format_iso_date(Date d);
int days_between(Date from, Date to);
Date add_days(Date d, int days);

// Uniform daily grid. Day i sits at abscissa i; the start date is absent for
// region-specific (aligned) time axes.
class TimeGrid {
  public:
    TimeGrid(std::optional<Date> start_day, std::size_t length);
    explicit TimeGrid(std::size_t length) : TimeGrid(std::nullopt, length) {}

    // Inclusive date range [first, last].
    static TimeGrid between(Date first, Date last);

    std::size_t length() const noexcept { return length_; }
    const std::optional<Date>& start_day() const noexcept { return start_; }
    std::optional<Date> date_at(std::size_t index) const;
    // Index of a calendar date, or nullopt when outside the grid.
    std::optional<std::size_t> index_of(Date d) const;
    // Abscissae 0, 1, ..., length-1.
    Eigen::VectorXd abscissae() const;

    bool operator==(const TimeGrid& other) const {
        return length_ == other.length_ && start_ == other.start_;
    }

  private:
    std::optional<Date> start_;
    std::size_t length_;
};

// n named curves sampled on a shared grid; row i belongs to names[i].
class FunctionalDataset {
  public:
    FunctionalDataset(TimeGrid grid, std::vector<std::string> names, Eigen::MatrixXd values);

    const TimeGrid& grid() const noexcept { return grid_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const Eigen::MatrixXd& values() const noexcept { return values_; }

    std::size_t size() const noexcept { return names_.size(); }
    std::size_t length() const noexcept { return grid_.length(); }
    std::optional<std::size_t> index_of(std::string_view name) const;
    Eigen::VectorXd curve(std::size_t i) const { return values_.row(static_cast<Eigen::Index>(i)).transpose(); }

    // Same grid and same region order.
    bool aligned_with(const FunctionalDataset& other) const;
    // Rows reordered to follow `order` (every name must be present).
    FunctionalDataset reordered(const std::vector<std::string>& order) const;
    FunctionalDataset subset(const std::vector<std::size_t>& rows) const;

  private:
    TimeGrid grid_;
    std::vector<std::string> names_;
    Eigen::MatrixXd values_;
};

}  // namespace fdepi
