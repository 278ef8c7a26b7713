#include "fdepi/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "fdepi/error.hpp"

namespace fdepi {

namespace fs = std::filesystem;

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw ValidationError(source + ": missing column '" + std::string(name) + "'");
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

CsvTable parse_csv(std::string_view text, std::string source) {
    CsvTable table;
    table.source = std::move(source);
    std::size_t pos = 0;
    bool first = true;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (first && line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (first) {
            table.header = std::move(fields);
            first = false;
            continue;
        }
        if (fields.size() != table.header.size())
            throw ValidationError(table.source + ": row " + std::to_string(table.rows.size() + 2) + " has " +
                                  std::to_string(fields.size()) + " fields, header has " +
                                  std::to_string(table.header.size()));
        table.rows.push_back(std::move(fields));
    }
    if (table.header.empty()) throw ValidationError(table.source + ": empty CSV file");
    return table;
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open input file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), path.string());
}

std::optional<double> parse_number(std::string_view cell) {
    while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
    while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
    if (cell.empty() || cell == "NA" || cell == "na" || cell == "NaN") return std::nullopt;
    if (cell == "inf" || cell == "Inf") return std::numeric_limits<double>::infinity();
    std::string tmp(cell);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size() || errno == ERANGE)
        throw ValidationError("not a number: '" + tmp + "'");
    return v;
}

double parse_number_required(std::string_view cell, std::string_view context) {
    try {
        auto v = parse_number(cell);
        if (!v) throw ValidationError("missing value");
        return *v;
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(context) + ": " + e.what());
    }
}

std::string format_number(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (std::isnan(value)) return "NA";
    if (value == 0.0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return buf;
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw ValidationError("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

std::string curves_to_csv(const FunctionalDataset& data) {
    std::string out = "region";
    char buf[16];
    for (std::size_t t = 0; t < data.length(); ++t) {
        std::snprintf(buf, sizeof buf, ",d%03zu", t);
        out += buf;
    }
    out += '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
        out += csv_escape(data.names()[i]);
        for (std::size_t t = 0; t < data.length(); ++t) {
            out += ',';
            out += format_number(data.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)));
        }
        out += '\n';
    }
    return out;
}

FunctionalDataset curves_from_csv(const CsvTable& table) {
    if (table.header.size() < 3 || table.header[0] != "region")
        throw ValidationError(table.source + ": curve matrix must start with 'region,d000,...'");
    const std::size_t length = table.header.size() - 1;
    Eigen::MatrixXd values(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(length));
    std::vector<std::string> names;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        names.push_back(table.rows[r][0]);
        for (std::size_t t = 0; t < length; ++t)
            values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = parse_number_required(
                table.rows[r][t + 1], table.source + " row '" + table.rows[r][0] + "' " + table.header[t + 1]);
    }
    return FunctionalDataset(TimeGrid(length), std::move(names), std::move(values));
}

}  // namespace fdepi
