#include "fdepi/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <set>
#include <unordered_map>

#include "fdepi/error.hpp"

namespace fdepi {

namespace {

int parse_int(std::string_view s, std::string_view whole) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ValidationError("invalid ISO-8601 date '" + std::string(whole) + "'");
    return v;
}

}  // namespace

Date parse_iso_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw ValidationError("invalid ISO-8601 date '" + std::string(text) + "'");
    const int y = parse_int(text.substr(0, 4), text);
    const int m = parse_int(text.substr(5, 2), text);
    const int d = parse_int(text.substr(8, 2), text);
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) throw ValidationError("invalid calendar date '" + std::string(text) + "'");
    return date;
}

std::string format_iso_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

int days_between(Date from, Date to) {
    return static_cast<int>((std::chrono::sys_days{to} - std::chrono::sys_days{from}).count());
}

Date add_days(Date d, int days) { return Date{std::chrono::sys_days{d} + std::chrono::days{days}}; }

TimeGrid::TimeGrid(std::optional<Date> start_day, std::size_t length) : start_(start_day), length_(length) {
    if (length < 2) throw ValidationError("time grid needs at least 2 days");
}

TimeGrid TimeGrid::between(Date first, Date last) {
    const int span = days_between(first, last);
    if (span < 1) throw ValidationError("time grid end must follow its start");
    return TimeGrid(first, static_cast<std::size_t>(span) + 1);
}

std::optional<Date> TimeGrid::date_at(std::size_t index) const {
    if (!start_ || index >= length_) return std::nullopt;
    return add_days(*start_, static_cast<int>(index));
}

std::optional<std::size_t> TimeGrid::index_of(Date d) const {
    if (!start_) return std::nullopt;
    const int offset = days_between(*start_, d);
    if (offset < 0 || static_cast<std::size_t>(offset) >= length_) return std::nullopt;
    return static_cast<std::size_t>(offset);
}

Eigen::VectorXd TimeGrid::abscissae() const {
    return Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(length_), 0.0, static_cast<double>(length_ - 1));
}

FunctionalDataset::FunctionalDataset(TimeGrid grid, std::vector<std::string> names, Eigen::MatrixXd values)
    : grid_(std::move(grid)), names_(std::move(names)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.rows()) != names_.size())
        throw ValidationError("dataset has " + std::to_string(values_.rows()) + " rows but " +
                              std::to_string(names_.size()) + " names");
    if (static_cast<std::size_t>(values_.cols()) != grid_.length())
        throw ValidationError("dataset rows have " + std::to_string(values_.cols()) +
                              " samples, grid has " + std::to_string(grid_.length()));
    std::set<std::string> seen;
    for (const auto& n : names_)
        if (!seen.insert(n).second) throw ValidationError("duplicate curve name '" + n + "'");
    if (!values_.allFinite()) throw ValidationError("dataset contains missing or non-finite values");
}

std::optional<std::size_t> FunctionalDataset::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    return std::nullopt;
}

bool FunctionalDataset::aligned_with(const FunctionalDataset& other) const {
    return grid_.length() == other.grid_.length() && names_ == other.names_;
}

FunctionalDataset FunctionalDataset::reordered(const std::vector<std::string>& order) const {
    std::vector<std::size_t> rows;
    rows.reserve(order.size());
    for (const auto& name : order) {
        auto i = index_of(name);
        if (!i) throw ValidationError("region '" + name + "' missing from dataset");
        rows.push_back(*i);
    }
    return subset(rows);
}

FunctionalDataset FunctionalDataset::subset(const std::vector<std::size_t>& rows) const {
    Eigen::MatrixXd v(static_cast<Eigen::Index>(rows.size()), values_.cols());
    std::vector<std::string> names;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        v.row(static_cast<Eigen::Index>(r)) = values_.row(static_cast<Eigen::Index>(rows[r]));
        names.push_back(names_.at(rows[r]));
    }
    return FunctionalDataset(grid_, std::move(names), std::move(v));
}

}  // namespace fdepi
