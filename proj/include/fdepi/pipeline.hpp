#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdepi/dataset.hpp"
#include "fdepi/depth.hpp"
#include "fdepi/funreg.hpp"
#include "fdepi/ingest.hpp"
#include "fdepi/iwt.hpp"
#include "fdepi/motif.hpp"
#include "fdepi/scalar.hpp"
#include "fdepi/select.hpp"
#include "fdepi/smoothing.hpp"

namespace fdepi {

// Everything a run depends on. Paths may be relative to the working directory.
struct PipelineConfig {
    std::filesystem::path dpc_csv;
    std::filesystem::path istat_csv;
    std::filesystem::path mobility_csv;
    std::filesystem::path population_csv;
    std::filesystem::path covariates_csv;
    std::filesystem::path output_dir = "fdepi_out";
    std::string dataset = "MAX";
    std::size_t clusters = 2;
    std::size_t motif_length = 65;
    std::size_t restarts = 20;
    std::optional<std::uint64_t> seed;
    std::size_t permutations = 1000;
    std::vector<double> lambda_grid;  // smoothing candidates; empty = default grid
    std::optional<double> delta;      // bicluster threshold; tuned when unset
    std::vector<double> delta_targets{0.0902, 0.0942};
    double alpha = 0.5;
    double variance_target = 0.95;
    std::size_t top_k = 5;
    bool derivative_distance = false;

    // Raw CSV names inside one directory: dpc.csv, istat.csv, mobility.csv,
    // population.csv, covariates.csv.
    void use_fixture_directory(const std::filesystem::path& dir);
    // One `key = value` setting; unknown keys and bad values name the key.
    void set(const std::string& key, const std::string& value);
    // Input files exist, seed present, ranges sane.
    void validate() const;
    // Canonical `key = value` lines (output directory and thread count excluded).
    std::string canonical_text() const;
};

// `key = value` lines with `#` comments.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text, const std::string& source);
// FNV-1a of the canonical text, hex.
std::string config_hash(const PipelineConfig& config);

const std::vector<std::string>& mortality_names();  // DPC, ISTAT, MAX

struct Inputs {
    std::map<std::string, FunctionalDataset> curves;  // DPC, ISTAT, MAX, positivity, mobility
    CovariateTable covariates;
    std::vector<std::string> warnings;

    const FunctionalDataset& at(const std::string& name) const;
};
Inputs load_inputs(const PipelineConfig& config);

struct Smoothed {
    std::map<std::string, FunctionalDataset> curves;
    std::map<std::string, LambdaSelection> selections;
};
Smoothed smooth_inputs(const Inputs& inputs, const PipelineConfig& config);

MotifModel fit_motifs(const Smoothed& smoothed, const PipelineConfig& config);
// Every smoothed dataset cut to its hard-label window.
std::map<std::string, FunctionalDataset> align_all(const MotifModel& model, const Smoothed& smoothed);
// Hard labels are 0-based cluster indices; group 1 is cluster 0.
std::vector<std::string> group_members(const MotifModel& model, std::size_t cluster);

IntervalTestResult group_test(const FunctionalDataset& aligned, const MotifModel& model,
                              const PipelineConfig& config);

struct ModelResult {
    std::string name;  // e.g. "mob + pos"
    FunRegSpec spec;
    FunRegFit fit;
    double r2 = 0.0;
    double loocv = 0.0;
    std::vector<std::pair<std::string, double>> partials;
};
ModelResult run_model(const std::string& name, const FunRegSpec& spec, bool partials);

struct CovariateAnalysis {
    Eigen::MatrixXd standardized;
    std::vector<std::string> regions;
    std::vector<std::string> covariates;
    Dendrogram region_tree;
    Dendrogram covariate_tree;
    double delta = 0.0;
    bool delta_tuned = false;
    double delta_loss = 0.0;
    std::vector<Bicluster> biclusters;
    Eigen::VectorXd vif;
};
CovariateAnalysis analyse_covariates(const CovariateTable& table, const PipelineConfig& config);

struct SelectionResult {
    std::string dataset;
    FpcExpansion expansion;
    SelectionPath path;
    std::vector<std::string> top;
};
SelectionResult run_selection(const std::string& dataset, const FunctionalDataset& aligned,
                              const CovariateTable& table, const PipelineConfig& config);

// PCA of the named covariates (standardized); component 1 scores feed the
// regression as "pc1".
PcaResult covariate_pca(const CovariateTable& table, const std::vector<std::string>& names);

// The functional models of the regression table for one response:
// mob, pos, mob + pos, and mob + pos + pc1 when pc1 is given.
std::vector<ModelResult> regression_table(const std::map<std::string, FunctionalDataset>& aligned,
                                          const std::string& response,
                                          const std::optional<Eigen::VectorXd>& pc1);

// Response on one scalar covariate (original units) per covariate.
struct MarginalEffect {
    std::string covariate;
    FunRegFit fit;
    std::vector<int> signs;
};
std::vector<MarginalEffect> marginal_effects(const FunctionalDataset& aligned_response, const CovariateTable& table);

}  // namespace fdepi
