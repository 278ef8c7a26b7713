#include "fdepi/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "fdepi/error.hpp"

namespace fdepi {

namespace {

constexpr double kPer100k = 1e5;

std::string normalize_label(std::string_view raw) {
    std::string out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        // U+2019 right single quotation mark
        if (i + 2 < raw.size() && static_cast<unsigned char>(raw[i]) == 0xE2 &&
            static_cast<unsigned char>(raw[i + 1]) == 0x80 && static_cast<unsigned char>(raw[i + 2]) == 0x99) {
            out += '\'';
            i += 2;
            continue;
        }
        const char c = raw[i];
        if (c == '-' || c == '_') out += ' ';
        else out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    const auto b = out.find_first_not_of(' ');
    const auto e = out.find_last_not_of(' ');
    return b == std::string::npos ? std::string() : out.substr(b, e - b + 1);
}

const std::map<std::string, std::string>& alias_table() {
    static const std::map<std::string, std::string> table = [] {
        std::map<std::string, std::string> m;
        for (const auto& r : canonical_regions()) m[normalize_label(r)] = r;
        const std::pair<const char*, const char*> extra[] = {
            {"p.a. trento", "Trento/Bolzano"},
            {"p.a. bolzano", "Trento/Bolzano"},
            {"trento", "Trento/Bolzano"},
            {"bolzano", "Trento/Bolzano"},
            {"trentino alto adige", "Trento/Bolzano"},
            {"trentino alto adige/sudtirol", "Trento/Bolzano"},
            {"trentino south tyrol", "Trento/Bolzano"},
            {"trento bolzano", "Trento/Bolzano"},
            {"valle d'aosta/vallée d'aoste", "Valle d'Aosta"},
            {"aosta valley", "Valle d'Aosta"},
            {"friuli venezia giulia", "Friuli Venezia Giulia"},
            {"emilia romagna", "Emilia Romagna"},
            {"lombardy", "Lombardia"},
            {"piedmont", "Piemonte"},
            {"tuscany", "Toscana"},
            {"apulia", "Puglia"},
            {"sicily", "Sicilia"},
            {"sardinia", "Sardegna"},
        };
        for (const auto& [k, v] : extra) m[k] = v;
        return m;
    }();
    return table;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
    return out;
}

std::string cell_context(const CsvTable& t, std::size_t row, std::string_view column) {
    return t.source + " row " + std::to_string(row + 2) + " column '" + std::string(column) + "'";
}

std::string iso(const std::string& date_cell) { return format_iso_date(parse_iso_date(date_cell)); }

}  // namespace

const std::vector<std::string>& canonical_regions() {
    static const std::vector<std::string> regions = {
        "Abruzzo",  "Basilicata", "Calabria", "Campania", "Emilia Romagna", "Friuli Venezia Giulia", "Lazio",
        "Liguria",  "Lombardia",  "Marche",   "Molise",   "Piemonte",       "Puglia",                "Sardegna",
        "Sicilia",  "Toscana",    "Trento/Bolzano",       "Umbria",         "Valle d'Aosta",         "Veneto"};
    return regions;
}

std::string canonical_region(std::string_view raw) {
    const auto& table = alias_table();
    auto it = table.find(normalize_label(raw));
    if (it == table.end())
        throw ValidationError("unknown region '" + std::string(raw) + "'; expected one of: " +
                              join(canonical_regions()));
    return it->second;
}

TimeGrid study_grid() {
    return TimeGrid::between(parse_iso_date("2020-02-16"), parse_iso_date("2020-04-30"));
}

Date dpc_release_start() { return parse_iso_date("2020-02-24"); }

DpcRaw parse_dpc(const CsvTable& t) {
    const auto c_date = t.column("date"), c_region = t.column("region"), c_deaths = t.column("cumulative_deaths"),
               c_cases = t.column("new_cases"), c_tests = t.column("new_tests");
    DpcRaw raw;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        auto& day = raw[canonical_region(row[c_region])][iso(row[c_date])];
        day.cumulative_deaths += parse_number_required(row[c_deaths], cell_context(t, r, "cumulative_deaths"));
        day.new_cases += parse_number_required(row[c_cases], cell_context(t, r, "new_cases"));
        day.new_tests += parse_number_required(row[c_tests], cell_context(t, r, "new_tests"));
    }
    return raw;
}

IstatRaw parse_istat(const CsvTable& t) {
    const auto c_date = t.column("date"), c_region = t.column("region");
    std::array<std::size_t, 6> cols{};
    for (int y = 0; y < 6; ++y) cols[static_cast<std::size_t>(y)] = t.column("deaths_" + std::to_string(2015 + y));
    IstatRaw raw;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        auto [it, inserted] = raw[canonical_region(row[c_region])].try_emplace(iso(row[c_date]));
        if (inserted) it->second.fill(0.0);
        for (std::size_t y = 0; y < 6; ++y) {
            auto v = parse_number(row[cols[y]]);
            it->second[y] += v ? *v : std::numeric_limits<double>::quiet_NaN();
        }
    }
    return raw;
}

MobilityRaw parse_mobility(const CsvTable& t) {
    const auto c_date = t.column("date"), c_region = t.column("region"), c_val = t.column("grocery_pharmacy_change");
    MobilityRaw raw;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto region = canonical_region(row[c_region]);
        const auto date = iso(row[c_date]);
        if (!raw[region].emplace(date, parse_number_required(row[c_val], cell_context(t, r, "grocery_pharmacy_change")))
                 .second)
            throw ValidationError(t.source + ": duplicate mobility entry for " + region + " on " + date);
    }
    return raw;
}

PopulationTable parse_population(const CsvTable& t) {
    const auto c_region = t.column("region"), c_pop = t.column("population"), c_cov = t.column("covered_population");
    PopulationTable table;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        auto& e = table[canonical_region(t.rows[r][c_region])];
        e.population += parse_number_required(t.rows[r][c_pop], cell_context(t, r, "population"));
        e.covered_population += parse_number_required(t.rows[r][c_cov], cell_context(t, r, "covered_population"));
    }
    return table;
}

namespace {

template <typename Map>
const typename Map::mapped_type& region_entry(const Map& raw, const std::string& region, std::string_view what) {
    auto it = raw.find(region);
    if (it == raw.end()) throw ValidationError(std::string(what) + ": no data for region '" + region + "'");
    return it->second;
}

const PopulationEntry& population_of(const PopulationTable& pop, const std::string& region) {
    auto it = pop.find(region);
    if (it == pop.end()) throw ValidationError("population table has no entry for '" + region + "'");
    if (!(it->second.population > 0) || !(it->second.covered_population > 0))
        throw ValidationError("population of '" + region + "' must be positive");
    return it->second;
}

std::vector<std::string> regions_of(const auto& raw) {
    std::vector<std::string> names;
    for (const auto& [region, days] : raw) names.push_back(region);
    return names;
}

}  // namespace

Built<FunctionalDataset> build_dpc_mortality(const DpcRaw& raw, const PopulationTable& population,
                                             const TimeGrid& grid, Date release_start) {
    const auto names = regions_of(raw);
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(names.size()),
                                                   static_cast<Eigen::Index>(grid.length()));
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& days = region_entry(raw, names[i], "DPC deaths");
        const double pop = population_of(population, names[i]).population;
        double previous = 0.0;
        for (std::size_t t = 0; t < grid.length(); ++t) {
            const Date d = *grid.date_at(t);
            if (days_between(release_start, d) < 0) continue;
            auto it = days.find(format_iso_date(d));
            if (it == days.end())
                throw ValidationError("DPC deaths: missing " + format_iso_date(d) + " for " + names[i]);
            double increment = it->second.cumulative_deaths - previous;
            if (increment < 0) {
                warnings.push_back("DPC deaths: cumulative count decreased for " + names[i] + " on " +
                                   format_iso_date(d) + "; increment clipped to 0");
                increment = 0.0;
            }
            previous = it->second.cumulative_deaths;
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = increment / pop * kPer100k;
        }
    }
    return {FunctionalDataset(grid, names, std::move(values)), std::move(warnings)};
}

Built<FunctionalDataset> build_istat_differential(const IstatRaw& raw, const PopulationTable& population,
                                                  const TimeGrid& grid) {
    const auto names = regions_of(raw);
    Eigen::MatrixXd values(static_cast<Eigen::Index>(names.size()), static_cast<Eigen::Index>(grid.length()));
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& days = region_entry(raw, names[i], "ISTAT deaths");
        const double covered = population_of(population, names[i]).covered_population;
        for (std::size_t t = 0; t < grid.length(); ++t) {
            const Date d = *grid.date_at(t);
            const auto key = format_iso_date(d);
            auto it = days.find(key);
            if (it == days.end()) throw ValidationError("ISTAT deaths: missing " + key + " for " + names[i]);
            const double deaths_2020 = it->second[5];
            if (std::isnan(deaths_2020))
                throw ValidationError("ISTAT deaths: missing 2020 count on " + key + " for " + names[i]);
            const IstatDay* reference = &it->second;
            if (d.month() == std::chrono::February && d.day() == std::chrono::day{29}) {
                const auto feb28 = format_iso_date(add_days(d, -1));
                auto prev = days.find(feb28);
                if (prev == days.end())
                    throw ValidationError("ISTAT deaths: leap-day reference needs " + feb28 + " for " + names[i]);
                reference = &prev->second;
            }
            double mean = 0.0;
            for (std::size_t y = 0; y < 5; ++y) {
                if (std::isnan((*reference)[y]))
                    throw ValidationError("ISTAT deaths: missing reference day " + key + " (" +
                                          std::to_string(2015 + y) + ") for " + names[i]);
                mean += (*reference)[y] / 5.0;
            }
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = (deaths_2020 - mean) / covered * kPer100k;
        }
    }
    return {FunctionalDataset(grid, names, std::move(values)), std::move(warnings)};
}

FunctionalDataset build_max_mortality(const FunctionalDataset& dpc, const FunctionalDataset& istat) {
    if (!(dpc.grid() == istat.grid()))
        throw ValidationError("MAX mortality: DPC and ISTAT curves are on different grids");
    const auto aligned = istat.reordered(dpc.names());
    return FunctionalDataset(dpc.grid(), dpc.names(), dpc.values().cwiseMax(aligned.values()));
}

Built<FunctionalDataset> build_positivity(const DpcRaw& raw, const TimeGrid& grid, Date release_start) {
    const auto names = regions_of(raw);
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(names.size()),
                                                   static_cast<Eigen::Index>(grid.length()));
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& days = region_entry(raw, names[i], "positivity");
        for (std::size_t t = 0; t < grid.length(); ++t) {
            const Date d = *grid.date_at(t);
            if (days_between(release_start, d) < 0) continue;
            const auto key = format_iso_date(d);
            auto it = days.find(key);
            if (it == days.end()) {
                warnings.push_back("positivity: no record for " + names[i] + " on " + key + "; set to 0");
                continue;
            }
            const auto& day = it->second;
            double ratio = 0.0;
            if (day.new_tests <= 0) {
                warnings.push_back("positivity: no tests for " + names[i] + " on " + key + "; set to 0");
            } else {
                ratio = day.new_cases / day.new_tests;
                if (ratio < 0.0 || ratio > 1.0)
                    warnings.push_back("positivity: ratio " + std::to_string(ratio) + " for " + names[i] + " on " +
                                       key + " truncated to [0, 1]");
                ratio = std::clamp(ratio, 0.0, 1.0);
            }
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = ratio;
        }
    }
    return {FunctionalDataset(grid, names, std::move(values)), std::move(warnings)};
}

FunctionalDataset build_mobility(const MobilityRaw& raw, const TimeGrid& grid) {
    const auto names = regions_of(raw);
    Eigen::MatrixXd values(static_cast<Eigen::Index>(names.size()), static_cast<Eigen::Index>(grid.length()));
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& days = region_entry(raw, names[i], "mobility");
        for (std::size_t t = 0; t < grid.length(); ++t) {
            const auto key = format_iso_date(*grid.date_at(t));
            auto it = days.find(key);
            if (it == days.end()) throw ValidationError("mobility: missing " + key + " for " + names[i]);
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = it->second;
        }
    }
    return FunctionalDataset(grid, names, std::move(values));
}

const std::vector<std::string>& canonical_covariates() {
    static const std::vector<std::string> names = {"% Over 65",
                                                   "% Diabetics",
                                                   "% Allergic",
                                                   "Adults per family doctor",
                                                   "ICU beds per 100K inhabitants",
                                                   "Ave. beds per hospital (whole)",
                                                   "Ave. beds per nursing home (ward)",
                                                   "Ave. students per classroom",
                                                   "Ave. employees per firm",
                                                   "Ave. members per household",
                                                   "Public transport rides per capita",
                                                   "PM10"};
    return names;
}

const std::vector<std::string>& covariate_short_labels() {
    static const std::vector<std::string> labels = {"%65+",        "%Dbts",        "%Allrgs",     "Adlts/doct",
                                                    "ICUBds/cpt",  "AvBds/hspt",   "AvBds/nrsg",  "AvStdns/clrm",
                                                    "AvEmpls/firm", "AvMbrs/hshld", "PubTrsp/cpt", "PM10"};
    return labels;
}

std::size_t CovariateTable::column(std::string_view name) const {
    for (std::size_t j = 0; j < covariates.size(); ++j)
        if (covariates[j] == name) return j;
    throw ValidationError("unknown covariate '" + std::string(name) + "'");
}

Eigen::MatrixXd CovariateTable::columns(const std::vector<std::string>& names) const {
    Eigen::MatrixXd out(values.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j)
        out.col(static_cast<Eigen::Index>(j)) = values.col(static_cast<Eigen::Index>(column(names[j])));
    return out;
}

CovariateTable build_covariates(const CsvTable& t, const std::vector<std::string>& covariates) {
    const auto c_region = t.column("region");
    std::vector<std::size_t> cols;
    for (const auto& name : covariates) cols.push_back(t.column(name));

    std::map<std::string, std::size_t> row_of;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto region = canonical_region(t.rows[r][c_region]);
        if (!row_of.emplace(region, r).second) throw ValidationError(t.source + ": duplicate region '" + region + "'");
    }
    CovariateTable out;
    out.regions = canonical_regions();
    out.covariates = covariates;
    const auto n = static_cast<Eigen::Index>(out.regions.size());
    const auto p = static_cast<Eigen::Index>(covariates.size());
    out.values.resize(n, p);
    out.imputed = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, p, false);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto it = row_of.find(out.regions[static_cast<std::size_t>(i)]);
        if (it == row_of.end())
            throw ValidationError(t.source + ": no covariates for region '" + out.regions[static_cast<std::size_t>(i)] + "'");
        for (Eigen::Index j = 0; j < p; ++j) {
            const auto& cell = t.rows[it->second][cols[static_cast<std::size_t>(j)]];
            auto v = parse_number(cell);
            out.values(i, j) = v ? *v : std::numeric_limits<double>::quiet_NaN();
            out.imputed(i, j) = !v;
        }
    }
    for (Eigen::Index j = 0; j < p; ++j) {
        std::vector<double> observed;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!out.imputed(i, j)) observed.push_back(out.values(i, j));
        const auto missing = static_cast<std::size_t>(n) - observed.size();
        if (missing == 0) continue;
        const auto& name = covariates[static_cast<std::size_t>(j)];
        if (4 * missing > static_cast<std::size_t>(n))
            throw ValidationError("covariate '" + name + "' has " + std::to_string(missing) + " of " +
                                  std::to_string(n) + " cells missing (more than 25%)");
        std::sort(observed.begin(), observed.end());
        const std::size_t m = observed.size();
        const double median = m % 2 ? observed[m / 2] : 0.5 * (observed[m / 2 - 1] + observed[m / 2]);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!out.imputed(i, j)) continue;
            out.values(i, j) = median;
            out.imputation_log.push_back(out.regions[static_cast<std::size_t>(i)] + "," + csv_escape(name) + "," +
                                         format_number(median) + ",column median of observed cells");
        }
    }
    return out;
}

std::string covariates_to_csv(const CovariateTable& table) {
    std::string out = "region";
    for (const auto& c : table.covariates) out += "," + csv_escape(c);
    out += '\n';
    for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
        out += csv_escape(table.regions[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < table.values.cols(); ++j) out += "," + format_number(table.values(i, j));
        out += '\n';
    }
    return out;
}

}  // namespace fdepi
