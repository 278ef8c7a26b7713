#include "fdepi/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fdepi/csv.hpp"
#include "fdepi/error.hpp"
#include "fdepi/parallel.hpp"
#include "fdepi/smoothing.hpp"

namespace fdepi {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Unparsable text counts as missing so the caller's message names the key.
std::optional<double> number(const std::string& value) {
    try {
        return parse_number(value);
    } catch (const ValidationError&) {
        return std::nullopt;
    }
}

std::size_t to_count(const std::string& key, const std::string& value) {
    const auto v = number(value);
    if (!v || *v < 0 || std::floor(*v) != *v)
        throw ValidationError("config '" + key + "': expected a non-negative integer, got '" + value + "'");
    return static_cast<std::size_t>(*v);
}

std::uint64_t to_seed(const std::string& value) {
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || end != value.data() + value.size())
        throw ValidationError("config 'seed': expected a non-negative integer, got '" + value + "'");
    return v;
}

double to_real(const std::string& key, const std::string& value) {
    const auto v = number(value);
    if (!v) throw ValidationError("config '" + key + "': expected a number, got '" + value + "'");
    return *v;
}

std::vector<double> to_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_real(key, trim(item)));
    if (out.empty()) throw ValidationError("config '" + key + "': empty list");
    return out;
}

std::string join_numbers(const std::vector<double>& v) {
    std::string out;
    for (double x : v) out += (out.empty() ? "" : ",") + format_number(x);
    return out;
}

}  // namespace

void PipelineConfig::use_fixture_directory(const std::filesystem::path& dir) {
    dpc_csv = dir / "dpc.csv";
    istat_csv = dir / "istat.csv";
    mobility_csv = dir / "mobility.csv";
    population_csv = dir / "population.csv";
    covariates_csv = dir / "covariates.csv";
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
    if (key == "fixtures") use_fixture_directory(value);
    else if (key == "dpc") dpc_csv = value;
    else if (key == "istat") istat_csv = value;
    else if (key == "mobility") mobility_csv = value;
    else if (key == "population") population_csv = value;
    else if (key == "covariates") covariates_csv = value;
    else if (key == "output") output_dir = value;
    else if (key == "dataset") dataset = value;
    else if (key == "k") clusters = to_count(key, value);
    else if (key == "length") motif_length = to_count(key, value);
    else if (key == "restarts") restarts = to_count(key, value);
    else if (key == "seed") seed = value == "unset" ? std::nullopt : std::optional<std::uint64_t>(to_seed(value));
    else if (key == "permutations") permutations = to_count(key, value);
    // "default", "tuned" and "unset" are what canonical_text writes for unset values
    else if (key == "lambda_grid") lambda_grid = value == "default" ? std::vector<double>{} : to_list(key, value);
    else if (key == "delta") delta = value == "tuned" ? std::nullopt : std::optional<double>(to_real(key, value));
    else if (key == "delta_targets") delta_targets = to_list(key, value);
    else if (key == "alpha") alpha = to_real(key, value);
    else if (key == "variance_target") variance_target = to_real(key, value);
    else if (key == "top_k") top_k = to_count(key, value);
    else if (key == "derivative_distance") {
        if (value != "true" && value != "false")
            throw ValidationError("config 'derivative_distance': expected true or false, got '" + value + "'");
        derivative_distance = value == "true";
    } else {
        throw ValidationError("config: unknown key '" + key + "'");
    }
}

void PipelineConfig::validate() const {
    const std::pair<const char*, const std::filesystem::path*> files[] = {
        {"dpc", &dpc_csv},           {"istat", &istat_csv},           {"mobility", &mobility_csv},
        {"population", &population_csv}, {"covariates", &covariates_csv}};
    for (const auto& [key, path] : files) {
        if (path->empty()) throw ValidationError("config '" + std::string(key) + "': no input file given");
        if (!std::filesystem::is_regular_file(*path))
            throw ValidationError("config '" + std::string(key) + "': file not found: " + path->string());
    }
    if (!seed) throw ValidationError("config 'seed': a seed is required");
    const auto& names = mortality_names();
    if (std::find(names.begin(), names.end(), dataset) == names.end())
        throw ValidationError("config 'dataset': expected DPC, ISTAT or MAX, got '" + dataset + "'");
    if (clusters < 1) throw ValidationError("config 'k': must be at least 1");
    if (motif_length < 2) throw ValidationError("config 'length': must be at least 2");
    if (restarts < 1) throw ValidationError("config 'restarts': must be at least 1");
    if (permutations < 100) throw ValidationError("config 'permutations': must be at least 100");
    for (double l : lambda_grid)
        if (!(l >= 0)) throw ValidationError("config 'lambda_grid': values must be non-negative");
    if (delta && !(*delta > 0)) throw ValidationError("config 'delta': must be positive");
    if (!(alpha > 0 && alpha <= 1)) throw ValidationError("config 'alpha': must lie in (0, 1]");
    if (!(variance_target > 0 && variance_target <= 1))
        throw ValidationError("config 'variance_target': must lie in (0, 1]");
    if (top_k < 1) throw ValidationError("config 'top_k': must be at least 1");
}

std::string PipelineConfig::canonical_text() const {
    std::ostringstream out;
    out << "dpc = " << dpc_csv.string() << "\n"
        << "istat = " << istat_csv.string() << "\n"
        << "mobility = " << mobility_csv.string() << "\n"
        << "population = " << population_csv.string() << "\n"
        << "covariates = " << covariates_csv.string() << "\n"
        << "dataset = " << dataset << "\n"
        << "k = " << clusters << "\n"
        << "length = " << motif_length << "\n"
        << "restarts = " << restarts << "\n"
        << "seed = " << (seed ? std::to_string(*seed) : std::string("unset")) << "\n"
        << "permutations = " << permutations << "\n"
        << "lambda_grid = " << (lambda_grid.empty() ? std::string("default") : join_numbers(lambda_grid)) << "\n"
        << "delta = " << (delta ? format_number(*delta) : std::string("tuned")) << "\n"
        << "delta_targets = " << join_numbers(delta_targets) << "\n"
        << "alpha = " << format_number(alpha) << "\n"
        << "variance_target = " << format_number(variance_target) << "\n"
        << "top_k = " << top_k << "\n"
        << "derivative_distance = " << (derivative_distance ? "true" : "false") << "\n";
    return out.str();
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text, const std::string& source) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(source + " line " + std::to_string(number) + ": expected 'key = value'");
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

std::string config_hash(const PipelineConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config.canonical_text()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const std::vector<std::string>& mortality_names() {
    static const std::vector<std::string> names{"DPC", "ISTAT", "MAX"};
    return names;
}

const FunctionalDataset& Inputs::at(const std::string& name) const {
    auto it = curves.find(name);
    if (it == curves.end()) throw ValidationError("unknown dataset '" + name + "'");
    return it->second;
}

Inputs load_inputs(const PipelineConfig& config) {
    const auto population = parse_population(read_csv(config.population_csv));
    const auto dpc_raw = parse_dpc(read_csv(config.dpc_csv));
    const auto istat_raw = parse_istat(read_csv(config.istat_csv));
    const auto mobility_raw = parse_mobility(read_csv(config.mobility_csv));

    Inputs in{{}, build_covariates(read_csv(config.covariates_csv)), {}};
    auto dpc = build_dpc_mortality(dpc_raw, population);
    auto istat = build_istat_differential(istat_raw, population);
    auto positivity = build_positivity(dpc_raw);
    for (auto* w : {&dpc.warnings, &istat.warnings, &positivity.warnings})
        in.warnings.insert(in.warnings.end(), w->begin(), w->end());
    const auto& order = dpc.value.names();
    const auto istat_v = istat.value.reordered(order);
    in.curves.emplace("DPC", dpc.value);
    in.curves.emplace("ISTAT", istat_v);
    in.curves.emplace("MAX", build_max_mortality(dpc.value, istat_v));
    in.curves.emplace("positivity", positivity.value.reordered(order));
    in.curves.emplace("mobility", build_mobility(mobility_raw).reordered(order));
    for (const auto& r : in.covariates.imputation_log) in.warnings.push_back("covariates: " + r);
    return in;
}

Smoothed smooth_inputs(const Inputs& inputs, const PipelineConfig& config) {
    const auto grid = config.lambda_grid.empty() ? default_lambda_grid() : config.lambda_grid;
    Smoothed out;
    for (const auto& [name, data] : inputs.curves) {
        auto sel = select_lambda(data, grid);
        out.curves.emplace(name, sel.model.fitted());
        out.selections.emplace(name, std::move(sel));
    }
    return out;
}

MotifModel fit_motifs(const Smoothed& smoothed, const PipelineConfig& config) {
    MotifOptions opt;
    opt.clusters = config.clusters;
    opt.motif_length = config.motif_length;
    opt.restarts = config.restarts;
    opt.seed = config.seed.value_or(0);
    opt.derivative_distance = config.derivative_distance;
    return prob_kma(smoothed.curves.at(config.dataset), opt);
}

std::map<std::string, FunctionalDataset> align_all(const MotifModel& model, const Smoothed& smoothed) {
    std::map<std::string, FunctionalDataset> out;
    for (const auto& [name, data] : smoothed.curves) out.emplace(name, apply_shifts(model, data));
    return out;
}

std::vector<std::string> group_members(const MotifModel& model, std::size_t cluster) {
    std::vector<std::string> out;
    for (std::size_t i : model.members(cluster)) out.push_back(model.names[i]);
    return out;
}

IntervalTestResult group_test(const FunctionalDataset& aligned, const MotifModel& model,
                              const PipelineConfig& config) {
    if (model.clusters < 2) throw ValidationError("iwt: needs at least two motif clusters");
    IwtOptions opt;
    opt.permutations = config.permutations;
    opt.seed = config.seed.value_or(0);
    const auto ordered = aligned.reordered(model.names);
    return iwt(ordered.subset(model.members(0)), ordered.subset(model.members(1)), opt);
}

ModelResult run_model(const std::string& name, const FunRegSpec& spec, bool partials) {
    ModelResult out{name, spec, fit(spec), 0.0, 0.0, {}};
    out.r2 = r_squared(out.fit);
    out.loocv = loocv_r_squared(spec);
    if (partials && spec.term_names().size() > 1) {
        for (const auto& term : spec.term_names()) out.partials.emplace_back(term, partial_r_squared(spec, term));
    }
    return out;
}

PcaResult covariate_pca(const CovariateTable& table, const std::vector<std::string>& names) {
    return pca(table.columns(names), names);
}

std::vector<ModelResult> regression_table(const std::map<std::string, FunctionalDataset>& aligned,
                                          const std::string& response,
                                          const std::optional<Eigen::VectorXd>& pc1) {
    const auto& y = aligned.at(response);
    const FunctionalTerm mob{"mob", aligned.at("mobility").reordered(y.names())};
    const FunctionalTerm pos{"pos", aligned.at("positivity").reordered(y.names())};
    std::vector<std::pair<std::string, FunRegSpec>> specs{
        {"mob", FunRegSpec{y, {mob}, {}, {}}},
        {"pos", FunRegSpec{y, {pos}, {}, {}}},
        {"mob + pos", FunRegSpec{y, {mob, pos}, {}, {}}},
    };
    if (pc1) specs.push_back({"mob + pos + pc1", FunRegSpec{y, {mob, pos}, {ScalarTerm{"pc1", *pc1}}, {}}});
    std::vector<ModelResult> out;
    for (const auto& [name, spec] : specs) out.push_back(run_model(name, spec, true));
    return out;
}

std::vector<MarginalEffect> marginal_effects(const FunctionalDataset& aligned_response, const CovariateTable& table) {
    const auto y = aligned_response.reordered(table.regions);
    std::vector<MarginalEffect> out(table.covariates.size());
    for (std::size_t j = 0; j < table.covariates.size(); ++j) {
        const auto& name = table.covariates[j];
        FunRegSpec spec{y, {}, {ScalarTerm{name, table.values.col(static_cast<Eigen::Index>(j))}}, {}};
        auto f = fit(spec);
        out[j] = MarginalEffect{name, f, effect_sign_bands(f, name)};
    }
    return out;
}

CovariateAnalysis analyse_covariates(const CovariateTable& table, const PipelineConfig& config) {
    CovariateAnalysis out;
    out.regions = table.regions;
    out.covariates = table.covariates;
    out.standardized = standardize_columns(table.values, table.covariates);
    out.region_tree = hcluster(out.standardized, Axis::rows, table.regions);
    out.covariate_tree = hcluster(out.standardized, Axis::columns, table.covariates);
    ChengChurchOptions cc;
    cc.seed = config.seed.value_or(0);
    cc.max_biclusters = std::max<std::size_t>(2, config.delta_targets.size());
    if (config.delta) {
        cc.delta = *config.delta;
        out.delta = *config.delta;
        out.biclusters = cheng_church(out.standardized, cc);
    } else {
        auto tuned = tune_delta(out.standardized, config.delta_targets, cc);
        out.delta = tuned.delta;
        out.delta_tuned = true;
        out.delta_loss = tuned.loss;
        out.biclusters = std::move(tuned.biclusters);
    }
    out.vif = vif(table.values, table.covariates);
    return out;
}

SelectionResult run_selection(const std::string& dataset, const FunctionalDataset& aligned,
                              const CovariateTable& table, const PipelineConfig& config) {
    const auto y = aligned.reordered(table.regions);
    SelectionResult out{dataset, fpc(y, config.variance_target), {}, {}};
    const Eigen::MatrixXd x = standardize_columns(table.values, table.covariates);
    SelectOptions opt;
    opt.alpha = config.alpha;
    out.path = select(out.expansion.scores, x, table.covariates, opt);
    out.top = top_features(out.path, config.top_k);
    return out;
}

}  // namespace fdepi
