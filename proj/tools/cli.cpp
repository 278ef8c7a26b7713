#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "fdepi/csv.hpp"
#include "fdepi/error.hpp"
#include "fdepi/parallel.hpp"
#include "fdepi/pipeline.hpp"
#include "svg.hpp"

#ifndef FDEPI_DEFAULT_FIXTURES
#define FDEPI_DEFAULT_FIXTURES "data/fixtures"
#endif

namespace fdepi::cli {

namespace {

namespace fs = std::filesystem;

std::string slug(const std::string& name) {
    std::string out;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else if (!out.empty() && out.back() != '_') out += '_';
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

std::string cell(double v) { return std::isfinite(v) ? format_number(v) : std::string("NA"); }

std::string joined(const std::vector<std::string>& items, const std::vector<std::size_t>& idx) {
    std::string out;
    for (std::size_t i : idx) out += (out.empty() ? "" : ";") + items[i];
    return out;
}

// Lazily computed pipeline state; each stage runs at most once per process.
class Session {
  public:
    Session(PipelineConfig config, std::ostream& log) : config_(std::move(config)), log_(log) {}

    const PipelineConfig& config() const { return config_; }

    const Inputs& inputs() {
        if (!inputs_) {
            inputs_ = load_inputs(config_);
            for (const auto& w : inputs_->warnings) log_ << "warning: " << w << "\n";
        }
        return *inputs_;
    }
    const Smoothed& smoothed() {
        if (!smoothed_) smoothed_ = smooth_inputs(inputs(), config_);
        return *smoothed_;
    }
    const MotifModel& motifs() {
        if (!motifs_) motifs_ = fit_motifs(smoothed(), config_);
        return *motifs_;
    }
    const std::map<std::string, FunctionalDataset>& aligned() {
        if (!aligned_) aligned_ = align_all(motifs(), smoothed());
        return *aligned_;
    }
    const DepthReport& depth(const std::string& dataset) {
        auto it = depth_.find(dataset);
        if (it == depth_.end()) it = depth_.emplace(dataset, signed_ranking(aligned().at(dataset))).first;
        return it->second;
    }
    const CovariateAnalysis& covariates() {
        if (!covariate_analysis_) covariate_analysis_ = analyse_covariates(inputs().covariates, config_);
        return *covariate_analysis_;
    }
    const SelectionResult& selection(const std::string& dataset) {
        auto it = selection_.find(dataset);
        if (it == selection_.end())
            it = selection_.emplace(dataset, run_selection(dataset, aligned().at(dataset), inputs().covariates, config_)).first;
        return it->second;
    }
    // PCA of the covariates selected for the configured dataset.
    const PcaResult& driver_pca() {
        if (!pca_) pca_ = covariate_pca(inputs().covariates, selection(config_.dataset).top);
        return *pca_;
    }
    const std::vector<ModelResult>& regressions() {
        if (!regressions_) {
            // pc1 scores follow the covariate table's region order
            auto in_order = aligned();
            for (auto& [name, data] : in_order) data = data.reordered(inputs().covariates.regions);
            Eigen::VectorXd pc1 = driver_pca().scores.col(0);
            regressions_ = regression_table(in_order, config_.dataset, pc1);
        }
        return *regressions_;
    }

  private:
    PipelineConfig config_;
    std::ostream& log_;
    std::optional<Inputs> inputs_;
    std::optional<Smoothed> smoothed_;
    std::optional<MotifModel> motifs_;
    std::optional<std::map<std::string, FunctionalDataset>> aligned_;
    std::map<std::string, DepthReport> depth_;
    std::optional<CovariateAnalysis> covariate_analysis_;
    std::map<std::string, SelectionResult> selection_;
    std::optional<PcaResult> pca_;
    std::optional<std::vector<ModelResult>> regressions_;
};

class Writer {
  public:
    explicit Writer(fs::path dir) : dir_(std::move(dir)) {}
    void operator()(const std::string& name, const std::string& content) {
        write_file_atomic(dir_ / name, content);
        written_.push_back(name);
    }
    const std::vector<std::string>& written() const { return written_; }

  private:
    fs::path dir_;
    std::vector<std::string> written_;
};

using Step = std::function<void(Session&, Writer&)>;

void step_ingest(Session& s, Writer& w) {
    const auto& in = s.inputs();
    for (const auto& [name, data] : in.curves) w("curves_" + slug(name) + ".csv", curves_to_csv(data));
    w("covariates_imputed.csv", covariates_to_csv(in.covariates));
    std::string text;
    for (const auto& line : in.warnings) text += line + "\n";
    w("ingest_warnings.txt", text);
}

void step_smooth(Session& s, Writer& w) {
    const auto& sm = s.smoothed();
    std::ostringstream sel, gcv;
    sel << "dataset,lambda,edf,mean_gcv\n";
    gcv << "dataset,lambda,mean_gcv\n";
    for (const auto& [name, choice] : sm.selections) {
        w("smoothed_" + slug(name) + ".csv", curves_to_csv(sm.curves.at(name)));
        sel << name << "," << cell(choice.lambda) << "," << cell(choice.model.edf()) << ","
            << cell(choice.model.gcv_mean()) << "\n";
        for (std::size_t k = 0; k < choice.candidates.size(); ++k)
            gcv << name << "," << cell(choice.candidates[k]) << "," << cell(choice.mean_gcv[k]) << "\n";
    }
    w("smoothing_lambda.csv", sel.str());
    w("smoothing_gcv.csv", gcv.str());

    const auto& ds = s.config().dataset;
    const auto& raw = s.inputs().at(ds);
    const auto& fitted = sm.curves.at(ds);
    std::vector<plot::Series> series;
    for (std::size_t i = 0; i < fitted.size(); ++i) {
        series.push_back({"", raw.curve(i), "#cccccc", false, 0.6});
        series.push_back({fitted.names()[i], fitted.curve(i), plot::group_color(i), false, 1.2});
    }
    w("smoothed_" + slug(ds) + ".svg", plot::lines(ds + " mortality, raw (grey) and smoothed", series, {},
                                                   "day since Feb 16", "deaths per 100k"));
}

void step_motifs(Session& s, Writer& w) {
    const auto& m = s.motifs();
    const auto K = static_cast<Eigen::Index>(m.clusters);
    std::ostringstream mem, sh, mot, tr;
    mem << "region";
    sh << "region";
    for (Eigen::Index k = 1; k <= K; ++k) mem << ",p_" << k, sh << ",shift_" << k;
    mem << ",hard_label\n";
    sh << ",hard_shift\n";
    for (std::size_t i = 0; i < m.names.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        mem << csv_escape(m.names[i]);
        sh << csv_escape(m.names[i]);
        for (Eigen::Index k = 0; k < K; ++k) mem << "," << cell(m.memberships(r, k)), sh << "," << m.shifts(r, k);
        mem << "," << m.hard_labels[i] + 1 << "\n";
        sh << "," << m.shift_of(i) << "\n";
    }
    mot << "day";
    for (Eigen::Index k = 1; k <= K; ++k) mot << ",v_" << k;
    mot << "\n";
    for (Eigen::Index t = 0; t < m.motifs.cols(); ++t) {
        mot << t;
        for (Eigen::Index k = 0; k < K; ++k) mot << "," << cell(m.motifs(k, t));
        mot << "\n";
    }
    tr << "iteration,objective\n";
    for (std::size_t it = 0; it < m.objective_trace.size(); ++it) tr << it + 1 << "," << cell(m.objective_trace[it]) << "\n";
    w("memberships.csv", mem.str());
    w("shifts.csv", sh.str());
    w("motifs.csv", mot.str());
    w("objective_trace.csv", tr.str());

    std::vector<plot::Series> series;
    for (Eigen::Index k = 0; k < K; ++k)
        series.push_back({"motif " + std::to_string(k + 1), m.motifs.row(k).transpose(),
                          plot::group_color(static_cast<std::size_t>(k)), false, 2.0});
    w("motifs.svg", plot::lines("Motifs (" + s.config().dataset + ")", series, {}, "day of motif"));
}

void step_align(Session& s, Writer& w) {
    const auto& m = s.motifs();
    for (const auto& [name, data] : s.aligned()) w("aligned_" + slug(name) + ".csv", curves_to_csv(data));
    const auto& ds = s.config().dataset;
    const auto& data = s.aligned().at(ds);
    std::vector<plot::Series> series;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto j = static_cast<std::size_t>(std::find(m.names.begin(), m.names.end(), data.names()[i]) - m.names.begin());
        series.push_back({data.names()[i] + " (group " + std::to_string(m.hard_labels[j] + 1) + ")", data.curve(i),
                          plot::group_color(m.hard_labels[j]), false, 1.0});
    }
    w("aligned_" + slug(ds) + ".svg", plot::lines(ds + " curves aligned on the motif window", series, {},
                                                  "day of window", "deaths per 100k"));
}

void step_iwt(Session& s, Writer& w) {
    const auto& ds = s.config().dataset;
    const auto res = group_test(s.aligned().at(ds), s.motifs(), s.config());
    std::ostringstream out;
    out << "t,w,p\n";
    for (std::size_t t = 0; t < res.length; ++t)
        for (std::size_t scale = 1; scale <= res.length; ++scale)
            out << t << "," << scale << "," << cell(res.adjusted(t, scale)) << "\n";
    w("iwt_adjusted.csv", out.str());
    w("iwt_pyramid.svg", plot::pyramid("Interval-wise adjusted p-values, group 1 vs group 2 (" + ds + ")",
                                       res.adjusted_p));
}

std::string ranking_csv(const DepthReport& rep) {
    std::vector<std::size_t> rank(rep.names.size());
    for (std::size_t r = 0; r < rep.ranking.size(); ++r) rank[rep.ranking[r]] = r + 1;
    std::ostringstream out;
    out << "region,depth,sign,rank,above_share,median,central,outlier\n";
    for (std::size_t i = 0; i < rep.names.size(); ++i)
        out << csv_escape(rep.names[i]) << "," << cell(rep.depths[i]) << "," << rep.signs[i] << "," << rank[i] << ","
            << cell(rep.above_share[i]) << "," << (i == rep.median_index) << "," << rep.is_central(i) << ","
            << rep.is_outlier(i) << "\n";
    return out.str();
}

void step_depth(Session& s, Writer& w) {
    for (const auto& ds : mortality_names()) {
        const auto& rep = s.depth(ds);
        const auto csv = ranking_csv(rep);
        w("depth_ranking_" + slug(ds) + ".csv", csv);
        if (ds == s.config().dataset) w("depth_ranking.csv", csv);

        const auto& data = s.aligned().at(ds);
        std::vector<plot::Series> series;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (rep.is_outlier(i)) series.push_back({data.names()[i], data.curve(i), "#d62728", true, 1.2});
        }
        series.push_back({"fence", rep.fence_upper, "#1f77b4", false, 1.0});
        series.push_back({"", rep.fence_lower, "#1f77b4", false, 1.0});
        series.push_back({"median: " + rep.names[rep.median_index], data.curve(rep.median_index), "#000000", false, 2.0});
        w("boxplot_" + slug(ds) + ".svg",
          plot::lines("Functional boxplot (" + ds + ")", series, {plot::Band{rep.central_lower, rep.central_upper}},
                      "day of window", "deaths per 100k"));
    }
}

void write_curve(Writer& w, const std::string& name, const Eigen::VectorXd& est, const Eigen::VectorXd& se,
                 const std::vector<int>& signs) {
    std::ostringstream out;
    out << "t,estimate,se,sign\n";
    for (Eigen::Index t = 0; t < est.size(); ++t)
        out << t << "," << cell(est(t)) << "," << cell(se(t)) << "," << signs[static_cast<std::size_t>(t)] << "\n";
    w(name, out.str());
}

std::string curve_svg(const std::string& title, const Eigen::VectorXd& est, const Eigen::VectorXd& se) {
    const Eigen::VectorXd lo = est - 1.96 * se, hi = est + 1.96 * se;
    return plot::lines(title, {{"estimate", est, "#000000", false, 1.5}}, {plot::Band{lo, hi}}, "day of window");
}

void step_regress_ff(Session& s, Writer& w) {
    const auto& table = s.regressions();
    std::ostringstream metrics;
    metrics << "model,term,r2,loocv_r2,partial_r2\n";
    for (const auto& m : table) {
        if (m.partials.empty()) {
            metrics << csv_escape(m.name) << ",," << cell(m.r2) << "," << cell(m.loocv) << ",NA\n";
        }
        for (const auto& [term, p] : m.partials)
            metrics << csv_escape(m.name) << "," << term << "," << cell(m.r2) << "," << cell(m.loocv) << "," << cell(p) << "\n";
    }
    w("fit_metrics.csv", metrics.str());

    // coefficient estimates of the largest model
    const auto& top = table.back();
    const auto& f = top.fit;
    for (std::size_t k = 0; k < f.functional_names.size(); ++k) {
        const auto& name = f.functional_names[k];
        const auto& b = f.surfaces[k];
        const auto& se = f.surface_se[k];
        std::ostringstream out;
        out << "s,t,estimate,se\n";
        for (Eigen::Index a = 0; a < b.rows(); ++a)
            for (Eigen::Index t = 0; t < b.cols(); ++t) out << a << "," << t << "," << cell(b(a, t)) << "," << cell(se(a, t)) << "\n";
        w("beta_surface_" + slug(name) + ".csv", out.str());
        std::vector<std::string> rl, cl;
        for (Eigen::Index a = 0; a < b.rows(); ++a) rl.push_back(a % 8 == 0 ? "s=" + std::to_string(a) : "");
        for (Eigen::Index t = 0; t < b.cols(); ++t) cl.push_back(t % 8 == 0 ? "t=" + std::to_string(t) : "");
        w("beta_surface_" + slug(name) + ".svg",
          plot::heatmap("beta(s, t) for " + name + " (" + top.name + ")", b, rl, cl));
    }
    for (std::size_t k = 0; k < f.scalar_names.size(); ++k) {
        const auto& name = f.scalar_names[k];
        write_curve(w, "beta_curve_" + slug(name) + ".csv", f.curves[k], f.curve_se[k], effect_sign_bands(f, name));
        w("beta_curve_" + slug(name) + ".svg", curve_svg("beta(t) for " + name, f.curves[k], f.curve_se[k]));
    }

    std::vector<std::string> labels;
    std::vector<double> values;
    for (Eigen::Index i = 0; i < f.residuals.rows(); ++i) {
        labels.push_back(f.region_names[static_cast<std::size_t>(i)]);
        values.push_back(f.residuals.row(i).squaredNorm() / static_cast<double>(f.residuals.cols()));
    }
    w("residuals.svg", plot::bars("Mean squared residual per region (" + top.name + ")", labels, values));
}

void step_regress_fs(Session& s, Writer& w) {
    const auto& in = s.inputs();
    const auto effects = marginal_effects(s.aligned().at(s.config().dataset), in.covariates);
    std::ostringstream summary;
    summary << "covariate,days_positive,days_negative\n";
    for (const auto& e : effects) {
        const auto name = slug(e.covariate);
        write_curve(w, "beta_curve_" + name + ".csv", e.fit.curves[0], e.fit.curve_se[0], e.signs);
        w("beta_curve_" + name + ".svg", curve_svg("beta(t) for " + e.covariate, e.fit.curves[0], e.fit.curve_se[0]));
        long pos = 0, neg = 0;
        for (int sgn : e.signs) pos += sgn > 0, neg += sgn < 0;
        summary << csv_escape(e.covariate) << "," << pos << "," << neg << "\n";
    }
    w("scalar_effects.csv", summary.str());
}

std::string dendrogram_csv(const Dendrogram& d) {
    std::ostringstream out;
    out << "step,left,right,height,left_label,right_label\n";
    auto label = [&](int op) { return op < 0 ? csv_escape(d.labels[static_cast<std::size_t>(-op - 1)]) : std::string(); };
    for (std::size_t k = 0; k < d.merge.size(); ++k)
        out << k + 1 << "," << d.merge[k][0] << "," << d.merge[k][1] << "," << cell(d.heights[k]) << ","
            << label(d.merge[k][0]) << "," << label(d.merge[k][1]) << "\n";
    return out.str();
}

void step_hclust(Session& s, Writer& w) {
    const auto& ca = s.covariates();
    w("dendrogram_rows.csv", dendrogram_csv(ca.region_tree));
    w("dendrogram_columns.csv", dendrogram_csv(ca.covariate_tree));
    w("covariates_heatmap.svg", plot::heatmap("Standardized covariates", ca.standardized, ca.regions,
                                              covariate_short_labels(), &ca.region_tree, &ca.covariate_tree));
}

void step_bicluster(Session& s, Writer& w) {
    const auto& ca = s.covariates();
    std::ostringstream out;
    out << "id,delta,delta_tuned,h_score,adjusted_h_score,regions,covariates\n";
    for (std::size_t b = 0; b < ca.biclusters.size(); ++b) {
        const auto& bc = ca.biclusters[b];
        out << b + 1 << "," << cell(ca.delta) << "," << ca.delta_tuned << "," << cell(bc.h_score) << ","
            << cell(bc.adjusted_h_score) << "," << csv_escape(joined(ca.regions, bc.rows)) << ","
            << csv_escape(joined(ca.covariates, bc.cols)) << "\n";
    }
    w("biclusters.csv", out.str());
}

void step_pca(Session& s, Writer& w) {
    const auto& p = s.driver_pca();
    const auto& names = s.selection(s.config().dataset).top;
    std::ostringstream out, scores;
    out << "component,variance,explained";
    for (const auto& n : names) out << "," << csv_escape(n);
    out << "\n";
    for (Eigen::Index c = 0; c < p.loadings.cols(); ++c) {
        out << c + 1 << "," << cell(p.variances(c)) << "," << cell(p.explained(c));
        for (Eigen::Index j = 0; j < p.loadings.rows(); ++j) out << "," << cell(p.loadings(j, c));
        out << "\n";
    }
    scores << "region";
    for (Eigen::Index c = 0; c < p.scores.cols(); ++c) scores << ",pc" << c + 1;
    scores << "\n";
    const auto& regions = s.inputs().covariates.regions;
    for (Eigen::Index i = 0; i < p.scores.rows(); ++i) {
        scores << csv_escape(regions[static_cast<std::size_t>(i)]);
        for (Eigen::Index c = 0; c < p.scores.cols(); ++c) scores << "," << cell(p.scores(i, c));
        scores << "\n";
    }
    w("pca.csv", out.str());
    w("pca_scores.csv", scores.str());
}

void step_vif(Session& s, Writer& w) {
    const auto& ca = s.covariates();
    std::ostringstream out;
    out << "covariate,vif\n";
    for (std::size_t j = 0; j < ca.covariates.size(); ++j)
        out << csv_escape(ca.covariates[j]) << "," << cell(ca.vif(static_cast<Eigen::Index>(j))) << "\n";
    w("vif.csv", out.str());
    std::vector<double> v(ca.vif.data(), ca.vif.data() + ca.vif.size());
    w("vif.svg", plot::bars("Variance inflation factors", covariate_short_labels(), v));
}

void step_select(Session& s, Writer& w) {
    for (const auto& ds : mortality_names()) {
        const auto& sel = s.selection(ds);
        const auto& path = sel.path;
        std::ostringstream out, top, fpcs;
        out << "step,lambda,covariate,group_norm\n";
        std::vector<Eigen::VectorXd> norms(path.covariates.size(), Eigen::VectorXd(static_cast<Eigen::Index>(path.lambdas.size())));
        for (std::size_t l = 0; l < path.lambdas.size(); ++l) {
            for (std::size_t j = 0; j < path.covariates.size(); ++j) {
                const double nrm = path.coefficients[l].row(static_cast<Eigen::Index>(j)).norm();
                norms[j](static_cast<Eigen::Index>(l)) = nrm;
                out << l + 1 << "," << cell(path.lambdas[l]) << "," << csv_escape(path.covariates[j]) << "," << cell(nrm) << "\n";
            }
        }
        top << "rank,covariate,entry_lambda\n";
        for (std::size_t r = 0; r < sel.top.size(); ++r) {
            const auto it = std::find(path.covariates.begin(), path.covariates.end(), sel.top[r]);
            const auto j = static_cast<std::size_t>(it - path.covariates.begin());
            const auto e = std::find(path.entry_order.begin(), path.entry_order.end(), j);
            const double lam = e == path.entry_order.end() ? NAN : path.entry_lambda[static_cast<std::size_t>(e - path.entry_order.begin())];
            top << r + 1 << "," << csv_escape(sel.top[r]) << "," << cell(lam) << "\n";
        }
        const auto& ex = sel.expansion;
        fpcs << "component,eigenvalue,cumulative,retained\n";
        for (Eigen::Index c = 0; c < ex.eigenvalues.size(); ++c)
            fpcs << c + 1 << "," << cell(ex.eigenvalues(c)) << "," << cell(ex.cumulative(c)) << ","
                 << (static_cast<std::size_t>(c) < ex.components) << "\n";
        w("selection_path_" + slug(ds) + ".csv", out.str());
        w("top_features_" + slug(ds) + ".csv", top.str());
        w("fpc_" + slug(ds) + ".csv", fpcs.str());

        std::vector<plot::Series> series;
        for (std::size_t j = 0; j < norms.size(); ++j)
            series.push_back({covariate_short_labels()[j], norms[j], plot::group_color(j), j >= 6, 1.4});
        w("selection_path_" + slug(ds) + ".svg",
          plot::lines("Group elastic-net path (" + ds + ")", series, {}, "path step (lambda decreasing)", "group norm"));
    }
}

const std::vector<std::pair<std::string, Step>>& steps() {
    static const std::vector<std::pair<std::string, Step>> all{
        {"ingest", step_ingest},       {"smooth", step_smooth},       {"motifs", step_motifs},
        {"align", step_align},         {"iwt", step_iwt},             {"depth", step_depth},
        {"regress-ff", step_regress_ff}, {"regress-fs", step_regress_fs}, {"hclust", step_hclust},
        {"bicluster", step_bicluster}, {"pca", step_pca},             {"vif", step_vif},
        {"select", step_select},
    };
    return all;
}

const char* step_help(const std::string& name) {
    static const std::map<std::string, const char*> help{
        {"ingest", "Build the raw curves and the imputed covariate table"},
        {"smooth", "Penalized spline smoothing with GCV-chosen lambda"},
        {"motifs", "Motif clustering with local alignment"},
        {"align", "Cut every dataset to the motif windows"},
        {"iwt", "Interval-wise test, group 1 vs group 2"},
        {"depth", "Functional boxplots and signed depth ranking"},
        {"regress-ff", "Function-on-function regression table"},
        {"regress-fs", "Response on each scalar covariate"},
        {"hclust", "Clustering of regions and covariates"},
        {"bicluster", "Cheng-Church biclusters of the covariates"},
        {"pca", "PCA of the selected covariates"},
        {"vif", "Variance inflation factors"},
        {"select", "FPC scores and group elastic-net selection"},
        {"pipeline", "Every step in order"},
    };
    return help.at(name);
}

std::size_t env_threads() {
    if (const char* v = std::getenv("FDEPI_THREADS")) {
        std::optional<double> n;
        try {
            n = parse_number(v);
        } catch (const ValidationError&) {
        }
        if (!n || *n < 1 || std::floor(*n) != *n)
            throw ValidationError(std::string("FDEPI_THREADS: expected a positive integer, got '") + v + "'");
        return static_cast<std::size_t>(*n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::string read_text(const fs::path& path, const std::string& field) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError(field + ": cannot read file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

const std::vector<std::string>& step_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [name, fn] : steps()) out.push_back(name);
        return out;
    }();
    return names;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Functional data analysis of regional mortality curves", "fdepi"};
    app.require_subcommand(1);

    // Flag values are collected as text and applied over the config file.
    std::map<std::string, std::string> flags;
    std::string config_file;
    std::optional<std::size_t> threads;
    bool derivative = false;
    struct Flag {
        const char* key;
        const char* name;
        const char* help;
    };
    const Flag flag_table[] = {
        {"fixtures", "--fixtures", "Directory with dpc.csv, istat.csv, mobility.csv, population.csv, covariates.csv"},
        {"dpc", "--dpc", "DPC CSV"},
        {"istat", "--istat", "ISTAT CSV"},
        {"mobility", "--mobility", "Mobility CSV"},
        {"population", "--population", "Population CSV"},
        {"covariates", "--covariates", "Covariate CSV"},
        {"output", "-o,--output", "Output directory"},
        {"dataset", "--dataset", "DPC, ISTAT or MAX"},
        {"k", "-k,--k", "Number of motif clusters"},
        {"length", "--length", "Motif length in days"},
        {"restarts", "--restarts", "Random restarts"},
        {"seed", "--seed", "Random seed (required)"},
        {"permutations", "--permutations", "Permutations for the interval test"},
        {"lambda_grid", "--lambda-grid", "Comma-separated smoothing candidates"},
        {"delta", "--delta", "Bicluster threshold (tuned when absent)"},
        {"delta_targets", "--delta-targets", "Comma-separated adjusted H targets for tuning"},
        {"alpha", "--alpha", "Lasso share of the elastic-net penalty"},
        {"variance_target", "--variance-target", "FPC variance fraction"},
        {"top_k", "--top-k", "Selected covariates to report"},
    };

    std::vector<CLI::App*> subs;
    for (const auto& name : step_names()) subs.push_back(app.add_subcommand(name, step_help(name)));
    subs.push_back(app.add_subcommand("pipeline", step_help("pipeline")));
    for (auto* sub : subs) {
        sub->add_option("--config", config_file, "key = value file; flags win");
        sub->add_option("--threads", threads, "Worker threads (default FDEPI_THREADS, else all cores)");
        sub->add_flag("--derivative-distance", derivative, "Motif distance on first differences");
        for (const auto& f : flag_table) {
            const std::string key = f.key;
            sub->add_option_function<std::string>(f.name, [&flags, key](const std::string& v) { flags[key] = v; }, f.help);
        }
    }

    std::vector<std::string> argv_tail(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(argv_tail.begin(), argv_tail.end());
    try {
        app.parse(argv_tail);
    } catch (const CLI::CallForHelp&) {
        for (auto* sub : subs)
            if (sub->parsed()) {
                out << sub->help();
                return 0;
            }
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    std::string command;
    for (auto* sub : subs) {
        if (sub->parsed()) command = sub->get_name();
    }

    try {
        PipelineConfig config;
        config.use_fixture_directory(FDEPI_DEFAULT_FIXTURES);
        if (!config_file.empty()) {
            for (const auto& [key, value] : parse_config_text(read_text(config_file, "--config"), config_file))
                config.set(key, value);
        }
        // the fixture directory goes first so single-file flags can override it
        if (auto it = flags.find("fixtures"); it != flags.end()) config.set("fixtures", it->second);
        for (const auto& [key, value] : flags)
            if (key != "fixtures") config.set(key, value);
        if (derivative) config.derivative_distance = true;
        config.validate();
        const std::size_t workers = threads ? *threads : env_threads();
        if (workers < 1) throw ValidationError("--threads: must be at least 1");
        set_default_threads(workers);

        fs::create_directories(config.output_dir);
        Session session(config, err);
        Writer writer(config.output_dir);
        std::vector<std::pair<std::string, double>> timings;
        for (const auto& [name, fn] : steps()) {
            if (command != "pipeline" && command != name) continue;
            const auto t0 = std::chrono::steady_clock::now();
            fn(session, writer);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            timings.emplace_back(name, secs);
            out << name << ": " << std::fixed << std::setprecision(2) << secs << " s\n" << std::defaultfloat;
        }

        // Comment lines plus the canonical settings, so the manifest can be
        // passed back with --config.
        std::ostringstream manifest;
        manifest << "# fdepi run manifest\n"
                 << "# command: " << command << "\n"
                 << "# config_hash: " << config_hash(config) << "\n"
                 << "# seed: " << *config.seed << "\n"
                 << "# threads: " << workers << "\n";
        for (const auto& [name, secs] : timings) manifest << "# step " << name << " wall_seconds " << secs << "\n";
        for (const auto& file : writer.written()) manifest << "# artifact " << file << "\n";
        manifest << config.canonical_text();
        write_file_atomic(config.output_dir / "run_manifest.txt", manifest.str());
        return 0;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        err << "numerical failure in module " << e.module() << ", operation " << e.operation() << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace fdepi::cli
