#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fdepi/csv.hpp"
#include "fdepi/dataset.hpp"

namespace fdepi {

// The 20 analysis regions (the two autonomous provinces merged), sorted.
const std::vector<std::string>& canonical_regions();
// Maps a raw region label (including common aliases such as "P.A. Trento")
// to its canonical name; unknown labels raise an error listing the canonical names.
std::string canonical_region(std::string_view raw);

// Feb 16 - Apr 30, 2020 (75 days).
TimeGrid study_grid();
// First day with official death/test releases; earlier days are zero.
Date dpc_release_start();

template <typename T>
struct Built {
    T value;
    std::vector<std::string> warnings;
};

struct DpcDay {
    double cumulative_deaths = 0.0;
    double new_cases = 0.0;
    double new_tests = 0.0;
};
// region -> ISO date -> counts; provinces of the same canonical region are summed.
using DpcRaw = std::map<std::string, std::map<std::string, DpcDay>>;
DpcRaw parse_dpc(const CsvTable& table);

// deaths_2015 .. deaths_2020; NaN where a cell is empty.
using IstatDay = std::array<double, 6>;
using IstatRaw = std::map<std::string, std::map<std::string, IstatDay>>;
IstatRaw parse_istat(const CsvTable& table);

using MobilityRaw = std::map<std::string, std::map<std::string, double>>;
MobilityRaw parse_mobility(const CsvTable& table);

struct PopulationEntry {
    double population = 0.0;          // residents
    double covered_population = 0.0;  // residents of municipalities in the all-cause death counts
};
using PopulationTable = std::map<std::string, PopulationEntry>;
// Columns: region,population,covered_population.
PopulationTable parse_population(const CsvTable& table);

// Daily increments of cumulative deaths per 100,000 residents; zero before
// `release_start`; decreasing cumulative counts give a zero increment and a warning.
Built<FunctionalDataset> build_dpc_mortality(const DpcRaw& raw, const PopulationTable& population,
                                             const TimeGrid& grid = study_grid(),
                                             Date release_start = dpc_release_start());

// (2020 deaths - mean of 2015-19 deaths) per 100,000 covered residents.
// Feb 29 takes its reference mean from the Feb 28 rows of the reference years.
Built<FunctionalDataset> build_istat_differential(const IstatRaw& raw, const PopulationTable& population,
                                                  const TimeGrid& grid = study_grid());

// Pointwise maximum of the raw (unsmoothed) DPC and ISTAT curves.
FunctionalDataset build_max_mortality(const FunctionalDataset& dpc, const FunctionalDataset& istat);

// New cases / new tests clamped to [0, 1]; zero tests give 0 with a warning.
Built<FunctionalDataset> build_positivity(const DpcRaw& raw, const TimeGrid& grid = study_grid(),
                                          Date release_start = dpc_release_start());

// Grocery & pharmacy fractional change; every grid day must be present.
FunctionalDataset build_mobility(const MobilityRaw& raw, const TimeGrid& grid = study_grid());

// The 12 covariates in analysis order.
const std::vector<std::string>& canonical_covariates();
// Compact labels for plots and tables, same order.
const std::vector<std::string>& covariate_short_labels();

struct CovariateTable {
    std::vector<std::string> regions;
    std::vector<std::string> covariates;
    Eigen::MatrixXd values;                                     // regions x covariates, imputed
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> imputed;  // cells filled by imputation
    std::vector<std::string> imputation_log;

    std::size_t column(std::string_view name) const;
    Eigen::MatrixXd columns(const std::vector<std::string>& names) const;
};

// Missing cells are filled with the column median of observed cells; more
// than 25% missing in a column is an error.
CovariateTable build_covariates(const CsvTable& table,
                                const std::vector<std::string>& covariates = canonical_covariates());

std::string covariates_to_csv(const CovariateTable& table);

}  // namespace fdepi
