#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fdepi/dataset.hpp"

namespace fdepi {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column position by header name; throws ValidationError naming the file.
    std::size_t column(std::string_view name) const;
    std::string source;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text, std::string source = "<memory>");

std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

// Locale-independent number parsing; empty / NA cells are reported as nullopt.
std::optional<double> parse_number(std::string_view cell);
double parse_number_required(std::string_view cell, std::string_view context);

// Shortest round-trip-stable text for CSV output ("%.12g").
std::string format_number(double value);

// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Curve matrix layout: `region,d000,d001,...`.
std::string curves_to_csv(const FunctionalDataset& data);
FunctionalDataset curves_from_csv(const CsvTable& table);

}  // namespace fdepi
