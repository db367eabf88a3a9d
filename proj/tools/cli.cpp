#include "cli.hpp"

#include <CLI11.hpp>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cgmdist/classic_metrics.hpp"
#include "cgmdist/dist_regression.hpp"
#include "cgmdist/errors.hpp"
#include "cgmdist/glucodensity.hpp"
#include "cgmdist/model_ladder.hpp"
#include "cgmdist/parallel.hpp"
#include "cgmdist/spline_smoother.hpp"
#include "cgmdist/synth.hpp"

namespace cgmdist::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// temp file in the target directory, then rename over the destination
void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp-" + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ConfigError("cannot write " + path.string());
        f << content;
        f.flush();
        if (!f) throw ConfigError("failed writing " + path.string());
    }
    fs::rename(tmp, path);
}

/// Everything a run records besides its primary outputs.
class Manifest {
public:
    explicit Manifest(std::string subcommand) : subcommand_(std::move(subcommand)) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        started_ = buf;
    }

    void input(const fs::path& p) {
        const std::string text = read_text_file(p);
        inputs_.push_back({{"path", p.string()}, {"bytes", text.size()}, {"fnv1a64", hex64(fnv1a(text))}});
    }
    void output(const fs::path& p) { outputs_.push_back(p.string()); }
    void config(json c) { config_ = std::move(c); }
    void warning(const std::string& key, std::size_t count) { warnings_[key] = count; }

    template <class F>
    auto stage(const std::string& name, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        auto finish = [&] {
            timings_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        };
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            finish();
        } else {
            auto r = f();
            finish();
            return r;
        }
    }

    std::string dump() const {
        json m;
        m["tool"] = "cgmdist";
        m["version"] = CGMDIST_VERSION;
        m["subcommand"] = subcommand_;
        m["inputs"] = inputs_;
        m["config"] = config_;
        m["config_hash"] = hex64(fnv1a(config_.dump()));
        m["outputs"] = outputs_;
        m["warnings"] = warnings_;
        // the only fields that change between identical runs
        m["run"] = {{"started_utc", started_}, {"timings_seconds", timings_}};
        return m.dump(2) + "\n";
    }

private:
    std::string subcommand_;
    std::string started_;
    json inputs_ = json::array();
    json outputs_ = json::array();
    json config_ = json::object();
    json warnings_ = json::object();
    json timings_ = json::object();
};

/// Settings shared by the subcommands; a config file fills whatever the flags leave unset.
struct Settings {
    std::string config;
    std::string manifest;
    std::size_t threads = 0;

    std::string cgm, subjects, calibration, out, out_dir;
    std::string scenario, preset = "default";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_subjects;
    std::optional<double> days;

    double tar_threshold = kDefaultHyperThreshold;
    double knots_per_day = 48.0;
    std::optional<double> lambda;
    bool raw_glucose = false;
    std::size_t grid_size = kDefaultQuantileGrid;
    bool densities = false;

    std::string subject, x_channel = "glucose", y_channel = "speed";
    std::size_t heat_grid = 64;

    std::string outcome;
    std::vector<std::string> outcomes;
    int model = 5;
    std::vector<int> models{1, 2, 3, 4, 5};
    std::size_t k0 = 8, l0 = 8;
    std::string criterion = "gcv";
    std::optional<double> known_scale;
    bool metrics_in_distributional = false;
    std::string out_model, out_diagnostics;
    std::string ladder_dir;
};

std::string config_key(const CLI::Option* opt) {
    if (opt->get_lnames().empty()) return {};
    std::string k = opt->get_lnames().front();
    for (auto& c : k)
        if (c == '-') c = '_';
    return k;
}

// Fills options the command line left unset from a flat JSON object.
void apply_config(CLI::App& sub, const std::string& path) {
    json cfg;
    try {
        cfg = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw UsageError("config " + path + ": " + e.what());
    }
    if (!cfg.is_object()) throw UsageError("config " + path + " must be a flat JSON object");
    std::map<std::string, CLI::Option*> by_key;
    for (CLI::Option* opt : sub.get_options()) {
        const auto k = config_key(opt);
        if (!k.empty() && k != "help" && k != "config") by_key[k] = opt;
    }
    for (const auto& [key, value] : cfg.items()) {
        auto it = by_key.find(key);
        if (it == by_key.end()) throw UsageError("config " + path + ": unknown key '" + key + "' for " + sub.get_name());
        CLI::Option* opt = it->second;
        if (opt->count() > 0) continue;
        auto add = [&](const json& v) {
            if (v.is_string()) opt->add_result(v.get<std::string>());
            else if (v.is_boolean()) opt->add_result(v.get<bool>() ? "true" : "false");
            else if (v.is_number()) opt->add_result(v.dump());
            else throw UsageError("config key '" + key + "' must be a string, number or boolean");
        };
        if (value.is_array())
            for (const auto& v : value) add(v);
        else
            add(value);
        opt->run_callback();
    }
}

CLI::Option* need(CLI::Option* opt) {
    if (opt->count() == 0) throw UsageError(opt->get_name() + " is required");
    return opt;
}

SmootherOptions smoother_options(const Settings& s) {
    SmootherOptions o;
    o.knots_per_day = s.knots_per_day;
    o.lambda = s.lambda;
    return o;
}

AssembleOptions assemble_options(const Settings& s) {
    AssembleOptions a;
    a.smoother = smoother_options(s);
    a.channels.raw_glucose = s.raw_glucose;
    a.channels.grid_size = s.grid_size;
    a.metrics.tar_threshold = s.tar_threshold;
    a.threads = s.threads;
    return a;
}

LadderOptions ladder_options(const Settings& s) {
    LadderOptions o;
    o.k0 = s.k0;
    o.l0 = s.l0;
    o.criterion = criterion_from_name(s.criterion);
    o.known_scale = s.known_scale;
    o.metrics_in_distributional = s.metrics_in_distributional;
    o.models = s.models;
    o.threads = s.threads;
    return o;
}

json smoothing_config(const Settings& s) {
    json c = {{"knots_per_day", s.knots_per_day}, {"raw_glucose", s.raw_glucose}, {"grid_size", s.grid_size},
              {"tar_threshold", s.tar_threshold}};
    c["lambda"] = s.lambda ? json(*s.lambda) : json(nullptr);
    return c;
}

json model_config(const Settings& s) {
    json c = {{"k0", s.k0}, {"l0", s.l0}, {"criterion", s.criterion},
              {"metrics_in_distributional", s.metrics_in_distributional}};
    c["known_scale"] = s.known_scale ? json(*s.known_scale) : json(nullptr);
    return c;
}

void emit(Manifest& m, const std::string& path, const std::string& content, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << content;
        return;
    }
    write_atomic(path, content);
    m.output(path);
}

void finish(Manifest& m, const Settings& s, const std::string& default_path, std::ostream& err) {
    const std::string path = !s.manifest.empty() ? s.manifest : default_path;
    if (path.empty())
        err << m.dump();
    else
        write_atomic(path, m.dump());
}

std::string default_manifest_for(const std::string& out) {
    return out.empty() || out == "-" ? std::string{} : out + ".manifest.json";
}

CohortScenario build_scenario(const Settings& s, Manifest& m) {
    CohortScenario sc;
    if (!s.scenario.empty()) {
        m.input(s.scenario);
        sc = scenario_from_json(read_text_file(s.scenario));
    } else {
        sc = preset_scenario(s.preset);
    }
    if (s.seed) sc.seed = *s.seed;
    if (s.n_subjects) sc.n_subjects = *s.n_subjects;
    if (s.days) sc.days = *s.days;
    sc.validate();
    return sc;
}

int cmd_synth(const Settings& s, std::ostream& out, std::ostream& err) {
    Manifest m("synth");
    const auto sc = build_scenario(s, m);
    m.config(json::parse(scenario_to_json(sc)));
    const auto cohort = m.stage("generate", [&] { return generate_cohort(sc); });
    const fs::path dir = s.out_dir;
    std::ostringstream cgm, subj, cal;
    write_cgm_csv(cgm, cohort.series);
    write_subject_csv(subj, cohort.subjects);
    write_calibration_csv(cal, cohort.calibration);
    emit(m, (dir / "cgm.csv").string(), cgm.str(), out);
    emit(m, (dir / "subjects.csv").string(), subj.str(), out);
    emit(m, (dir / "calibration.csv").string(), cal.str(), out);
    emit(m, (dir / "scenario.json").string(), scenario_to_json(sc) + "\n", out);
    finish(m, s, (dir / "manifest.json").string(), err);
    return 0;
}

int cmd_validate(const Settings& s, std::ostream& out, std::ostream& err) {
    Manifest m("validate");
    m.input(s.cgm);
    const auto series = m.stage("parse", [&] { return read_cgm_csv(s.cgm); });
    std::optional<CalibrationTable> cal;
    if (!s.calibration.empty()) {
        m.input(s.calibration);
        cal = read_calibration_csv(s.calibration);
    }
    m.config({{"calibration", !s.calibration.empty()}});
    std::ostringstream csv;
    csv << "subject_id,valid,span_minutes,monitored_days,violations\n";
    std::size_t invalid = 0;
    for (const auto& x : series) {
        std::optional<CalibrationLog> log;
        if (cal) {
            auto it = cal->find(x.subject_id());
            log = align_calibration(x, it == cal->end() ? std::map<long, int>{} : it->second);
        }
        const auto r = validate_series(x, log);
        invalid += !r.valid;
        std::string v;
        for (const auto& name : r.violations) v += (v.empty() ? "" : ";") + name;
        csv << x.subject_id() << ',' << (r.valid ? "true" : "false") << ',' << fmt6(x.span()) << ','
            << monitored_days(x) << ',' << v << '\n';
    }
    m.warning("invalid_series", invalid);
    emit(m, s.out, csv.str(), out);
    finish(m, s, default_manifest_for(s.out), err);
    if (invalid) err << invalid << " of " << series.size() << " series failed validation\n";
    return invalid ? 1 : 0;
}

int cmd_metrics(const Settings& s, std::ostream& out, std::ostream& err) {
    Manifest m("metrics");
    m.input(s.cgm);
    const auto series = m.stage("parse", [&] { return read_cgm_csv(s.cgm); });
    m.config({{"tar_threshold", s.tar_threshold}});
    MetricOptions mo;
    mo.tar_threshold = s.tar_threshold;
    std::vector<MetricPanel> panels(series.size());
    m.stage("metrics", [&] { parallel_for(series.size(), s.threads, [&](std::size_t i) { panels[i] = compute_metrics(series[i], mo); }); });
    std::ostringstream csv;
    csv << "subject_id,mean,sd,auc,mage,conga1,modd,tar\n";
    std::size_t no_modd = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& p = panels[i];
        no_modd += !p.modd;
        csv << series[i].subject_id() << ',' << fmt6(p.mean) << ',' << fmt6(p.sd) << ',' << fmt6(p.auc) << ','
            << fmt6(p.mage) << ',' << fmt6(p.conga1) << ',' << (p.modd ? fmt6(*p.modd) : "") << ',' << fmt6(p.tar)
            << '\n';
    }
    m.warning("modd_unavailable", no_modd);
    emit(m, s.out, csv.str(), out);
    finish(m, s, default_manifest_for(s.out), err);
    return 0;
}

json density_json(const DensityEstimate& d) {
    return {{"bandwidth", d.bandwidth}, {"grid", d.grid}, {"density", d.density}};
}

int cmd_glucodensity(const Settings& s, std::ostream& out, std::ostream& err) {
    Manifest m("glucodensity");
    m.input(s.cgm);
    const auto series = m.stage("parse", [&] { return read_cgm_csv(s.cgm); });
    auto cfg = smoothing_config(s);
    cfg["densities"] = s.densities;
    m.config(cfg);
    std::vector<json> rows(series.size());
    std::vector<std::size_t> failed(series.size(), 0);
    m.stage("profiles", [&] {
        parallel_for(series.size(), s.threads, [&](std::size_t i) {
            const auto traj = fit_spline(series[i], smoother_options(s));
            ChannelOptions co;
            co.raw_glucose = s.raw_glucose;
            co.grid_size = s.grid_size;
            const auto prof = build_channels(series[i], traj, co);
            json r;
            r["subject_id"] = series[i].subject_id();
            r["smoothing"] = {{"lambda", traj.lambda()}, {"edf", traj.edf()}};
            r["quantiles"] = {{"glucose", prof.glucose.values},
                              {"speed", prof.speed.values},
                              {"acceleration", prof.acceleration.values}};
            if (s.densities) {
                const auto samples = channel_samples(series[i], traj, s.raw_glucose);
                json d = json::object();
                const std::pair<const char*, const std::vector<double>*> chans[] = {
                    {"glucose", &samples.glucose}, {"speed", &samples.speed}, {"acceleration", &samples.acceleration}};
                for (const auto& [name, v] : chans) {
                    try {
                        d[name] = density_json(kde_univariate(*v));
                    } catch (const BandwidthError&) {
                        d[name] = nullptr;
                        ++failed[i];
                    }
                }
                r["densities"] = d;
            }
            rows[i] = std::move(r);
        });
    });
    json doc;
    doc["schema_version"] = 1;
    doc["probability_grid"] = probability_grid(s.grid_size);
    doc["subjects"] = rows;
    std::size_t nfail = 0;
    for (auto f : failed) nfail += f;
    m.warning("degenerate_densities", nfail);
    emit(m, s.out, doc.dump(2) + "\n", out);
    finish(m, s, default_manifest_for(s.out), err);
    return 0;
}

const std::vector<double>& samples_of(const ChannelSamples& c, Channel ch) {
    switch (ch) {
        case Channel::glucose: return c.glucose;
        case Channel::speed: return c.speed;
        case Channel::acceleration: return c.acceleration;
    }
    return c.glucose;
}

int cmd_heatmap(const Settings& s, std::ostream& out, std::ostream& err) {
    Manifest m("heatmap");
    m.input(s.cgm);
    const auto series = m.stage("parse", [&] { return read_cgm_csv(s.cgm); });
    const Channel cx = channel_from_name(s.x_channel), cy = channel_from_name(s.y_channel);
    if (cx == cy) throw UsageError("--x and --y must name different channels");
    auto cfg = smoothing_config(s);
    cfg["subject"] = s.subject.empty() ? json(nullptr) : json(s.subject);
    cfg["x"] = s.x_channel;
    cfg["y"] = s.y_channel;
    cfg["grid"] = s.heat_grid;
    m.config(cfg);
    std::vector<double> xs, ys;
    bool found = false;
    m.stage("samples", [&] {
        for (const auto& x : series) {
            if (!s.subject.empty() && x.subject_id() != s.subject) continue;
            found = true;
            const auto c = channel_samples(x, fit_spline(x, smoother_options(s)), s.raw_glucose);
            xs.insert(xs.end(), samples_of(c, cx).begin(), samples_of(c, cx).end());
            ys.insert(ys.end(), samples_of(c, cy).begin(), samples_of(c, cy).end());
        }
    });
    if (!found) throw ValidationError("subject '" + s.subject + "' not found in " + s.cgm);
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(xs.size()), 2);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        pts(static_cast<Eigen::Index>(i), 0) = xs[i];
        pts(static_cast<Eigen::Index>(i), 1) = ys[i];
    }
    const auto grid = m.stage("density", [&] { return kde_multivariate(pts, std::nullopt, s.heat_grid); });
    std::ostringstream csv;
    csv << s.x_channel << '\\' << s.y_channel;
    for (double y : grid.axes[1]) csv << ',' << fmt6(y);
    csv << '\n';
    for (std::size_t a = 0; a < grid.axes[0].size(); ++a) {
        csv << fmt6(grid.axes[0][a]);
        for (std::size_t b = 0; b < grid.axes[1].size(); ++b) csv << ',' << fmt6(grid.density[a * grid.axes[1].size() + b]);
        csv << '\n';
    }
    emit(m, s.out, csv.str(), out);
    finish(m, s, default_manifest_for(s.out), err);
    return 0;
}

struct LoadedCohort {
    CohortData data;
    std::vector<std::string> outcomes;
};

LoadedCohort load_cohort(const Settings& s, Manifest& m, bool allow_scenario) {
    std::vector<GlucoseSeries> series;
    SubjectTable table;
    if (allow_scenario && s.cgm.empty() && s.subjects.empty()) {
        const auto sc = build_scenario(s, m);
        auto c = m.stage("generate", [&] { return generate_cohort(sc); });
        series = std::move(c.series);
        table = std::move(c.subjects);
    } else {
        if (s.cgm.empty() || s.subjects.empty()) throw UsageError("--cgm and --subjects are both required");
        m.input(s.cgm);
        m.input(s.subjects);
        series = m.stage("parse", [&] { return read_cgm_csv(s.cgm); });
        table = read_subject_csv(s.subjects);
    }
    LoadedCohort out;
    out.data = m.stage("features", [&] { return assemble_cohort(series, table, assemble_options(s)); });
    out.outcomes = s.outcomes.empty() ? out.data.table.outcome_names : s.outcomes;
    m.warning("unmatched_series", out.data.unmatched_series);
    return out;
}

json diagnostics_json(const FitDiagnostics& d) {
    return {{"n", d.n},           {"rss", d.rss},
            {"tss", d.tss},       {"r_squared", d.r_squared},
            {"adj_r_squared", d.adj_r_squared}, {"log_likelihood", d.log_likelihood},
            {"ubre", d.ubre},     {"gcv", d.gcv},
            {"edf", d.edf},       {"scale", d.scale}};
}

int cmd_fit(const Settings& s, std::ostream& out, std::ostream& err) {
    Manifest m("fit");
    auto cfg = smoothing_config(s);
    cfg.update(model_config(s));
    cfg["outcome"] = s.outcome;
    cfg["model"] = s.model;
    m.config(cfg);
    const auto cohort = load_cohort(s, m, false);
    const auto spec = ladder_spec(s.model, ladder_options(s));
    const auto result = m.stage("fit", [&] { return fit_outcome(cohort.data, s.outcome, spec); });
    m.warning("clamped_quantiles", result.clamped);
    json diag = diagnostics_json(result.model.diagnostics);
    diag = json{{"outcome", s.outcome}, {"model", s.model}, {"rows_used", result.rows.size()},
                {"rows_dropped", cohort.data.table.records.size() - result.rows.size()},
                {"clamped_quantiles", result.clamped}, {"diagnostics", diag}};
    emit(m, s.out_model, model_to_json(result.model) + "\n", out);
    emit(m, s.out_diagnostics, diag.dump(2) + "\n", out);
    finish(m, s, default_manifest_for(s.out_model), err);
    return 0;
}

json ladder_json(const LadderTable& t) {
    json doc;
    doc["schema_version"] = 1;
    doc["outcomes"] = t.outcomes;
    doc["models"] = t.models;
    json entries = json::array();
    for (const auto& e : t.entries) {
        json coef = json::array();
        coef.push_back({{"term", e.fitted.intercept.name}, {"estimate", e.fitted.intercept.estimate},
                        {"std_error", e.fitted.intercept.std_error}});
        for (const auto& c : e.fitted.linear)
            coef.push_back({{"term", c.name}, {"estimate", c.estimate}, {"std_error", c.std_error}});
        json smooth = json::array();
        for (const auto& term : e.fitted.terms)
            smooth.push_back({{"channel", channel_name(term.basis.channel)},
                              {"edf", term.edf},
                              {"lambda_u", term.lambda_u},
                              {"lambda_p", term.lambda_p}});
        entries.push_back({{"outcome", e.outcome},
                           {"model", e.model},
                           {"diagnostics", diagnostics_json(e.diagnostics)},
                           {"clamped_quantiles", e.clamped},
                           {"coefficients", coef},
                           {"smooth_terms", smooth}});
    }
    doc["entries"] = entries;
    return doc;
}

std::string ladder_csv(const json& doc) {
    std::ostringstream csv;
    csv << "outcome";
    for (int mdl : doc["models"]) csv << ",model_" << mdl;
    csv << '\n';
    for (const auto& o : doc["outcomes"]) {
        csv << o.get<std::string>();
        for (int mdl : doc["models"])
            for (const auto& e : doc["entries"])
                if (e["outcome"] == o && e["model"] == mdl) csv << ',' << fmt6(e["diagnostics"]["adj_r_squared"].get<double>());
        csv << '\n';
    }
    return csv.str();
}

std::string diagnostics_csv(const json& doc) {
    std::ostringstream csv;
    csv << "outcome,model,n,edf,r_squared,adj_r_squared,log_likelihood,ubre,gcv,clamped_quantiles\n";
    for (const auto& e : doc["entries"]) {
        const auto& d = e["diagnostics"];
        csv << e["outcome"].get<std::string>() << ',' << e["model"].get<int>() << ',' << d["n"].get<std::size_t>();
        for (const char* k : {"edf", "r_squared", "adj_r_squared", "log_likelihood", "ubre", "gcv"})
            csv << ',' << fmt6(d[k].get<double>());
        csv << ',' << e["clamped_quantiles"].get<std::size_t>() << '\n';
    }
    return csv.str();
}

// Rows are terms, two columns (estimate, standard error) per outcome; smooth terms report edf.
std::string coefficient_csv(const json& doc, int model) {
    std::vector<std::string> terms;
    std::vector<std::string> smooth;
    for (const auto& e : doc["entries"]) {
        if (e["model"] != model) continue;
        for (const auto& c : e["coefficients"])
            if (std::find(terms.begin(), terms.end(), c["term"]) == terms.end()) terms.push_back(c["term"]);
        for (const auto& t : e["smooth_terms"])
            if (std::find(smooth.begin(), smooth.end(), t["channel"]) == smooth.end()) smooth.push_back(t["channel"]);
    }
    std::ostringstream csv;
    csv << "term";
    for (const auto& o : doc["outcomes"]) csv << ',' << o.get<std::string>() << ',' << o.get<std::string>() << "_se";
    csv << '\n';
    for (const auto& term : terms) {
        csv << term;
        for (const auto& o : doc["outcomes"])
            for (const auto& e : doc["entries"]) {
                if (e["outcome"] != o || e["model"] != model) continue;
                std::string est, se;
                for (const auto& c : e["coefficients"])
                    if (c["term"] == term) {
                        est = fmt6(c["estimate"].get<double>());
                        se = fmt6(c["std_error"].get<double>());
                    }
                csv << ',' << est << ',' << se;
            }
        csv << '\n';
    }
    for (const auto& ch : smooth) {
        csv << "F(" << ch << ") edf";
        for (const auto& o : doc["outcomes"])
            for (const auto& e : doc["entries"]) {
                if (e["outcome"] != o || e["model"] != model) continue;
                std::string edf;
                for (const auto& t : e["smooth_terms"])
                    if (t["channel"] == ch) edf = fmt6(t["edf"].get<double>());
                csv << ',' << edf << ',';
            }
        csv << '\n';
    }
    return csv.str();
}

int cmd_ladder(const Settings& s, std::ostream& out, std::ostream& err) {
    Manifest m("ladder");
    auto cfg = smoothing_config(s);
    cfg.update(model_config(s));
    cfg["outcomes"] = s.outcomes;
    cfg["models"] = s.models;
    m.config(cfg);
    const auto cohort = load_cohort(s, m, true);
    const auto table = m.stage("fit", [&] { return run_model_ladder(cohort.data, cohort.outcomes, ladder_options(s)); });
    std::size_t clamped = 0;
    for (const auto& e : table.entries) clamped += e.clamped;
    m.warning("clamped_quantiles", clamped);
    const json doc = ladder_json(table);
    const fs::path dir = s.out_dir;
    emit(m, (dir / "ladder.csv").string(), ladder_csv(doc), out);
    emit(m, (dir / "ladder_diagnostics.csv").string(), diagnostics_csv(doc), out);
    for (int mdl : s.models)
        emit(m, (dir / ("coefficients_model_" + std::to_string(mdl) + ".csv")).string(), coefficient_csv(doc, mdl), out);
    emit(m, (dir / "ladder.json").string(), doc.dump(2) + "\n", out);
    finish(m, s, (dir / "manifest.json").string(), err);
    return 0;
}

std::string fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string render_report(const json& doc) {
    std::ostringstream md;
    md << "# Model comparison\n\n## Adjusted R²\n\n| outcome |";
    for (int mdl : doc["models"]) md << " model " << mdl << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < doc["models"].size(); ++i) md << "---:|";
    md << '\n';
    auto entry = [&](const json& o, int mdl) -> const json& {
        for (const auto& e : doc["entries"])
            if (e["outcome"] == o && e["model"] == mdl) return e;
        throw ParseError("ladder file has no entry for model " + std::to_string(mdl), 0);
    };
    for (const auto& o : doc["outcomes"]) {
        md << "| " << o.get<std::string>() << " |";
        for (int mdl : doc["models"]) md << ' ' << fixed(entry(o, mdl)["diagnostics"]["adj_r_squared"], 3) << " |";
        md << '\n';
    }
    md << "\n## Fit criteria\n\n| outcome | model | n | edf | log-likelihood | UBRE | GCV |\n|---|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& o : doc["outcomes"])
        for (int mdl : doc["models"]) {
            const auto& d = entry(o, mdl)["diagnostics"];
            md << "| " << o.get<std::string>() << " | " << mdl << " | " << d["n"].get<std::size_t>() << " | "
               << fmt6(d["edf"]) << " | " << fmt6(d["log_likelihood"]) << " | " << fmt6(d["ubre"]) << " | "
               << fmt6(d["gcv"]) << " |\n";
        }
    for (int mdl : doc["models"]) {
        md << "\n## Model " << mdl << " coefficients\n\n| term |";
        for (const auto& o : doc["outcomes"]) md << ' ' << o.get<std::string>() << " |";
        md << "\n|---|";
        for (std::size_t i = 0; i < doc["outcomes"].size(); ++i) md << "---:|";
        md << '\n';
        const auto& first = entry(doc["outcomes"][0], mdl);
        for (const auto& c : first["coefficients"]) {
            md << "| " << c["term"].get<std::string>() << " |";
            for (const auto& o : doc["outcomes"])
                for (const auto& x : entry(o, mdl)["coefficients"])
                    if (x["term"] == c["term"])
                        md << ' ' << fmt6(x["estimate"]) << " (" << fmt6(x["std_error"]) << ") |";
            md << '\n';
        }
        for (const auto& t : first["smooth_terms"]) {
            md << "| F(" << t["channel"].get<std::string>() << "), edf |";
            for (const auto& o : doc["outcomes"])
                for (const auto& x : entry(o, mdl)["smooth_terms"])
                    if (x["channel"] == t["channel"]) md << ' ' << fmt6(x["edf"]) << " |";
            md << '\n';
        }
    }
    return md.str();
}

int cmd_report(const Settings& s, std::ostream& out, std::ostream& err) {
    Manifest m("report");
    const fs::path src = fs::path(s.ladder_dir) / "ladder.json";
    m.input(src);
    json doc;
    try {
        doc = json::parse(read_text_file(src));
    } catch (const json::exception& e) {
        throw ParseError(src.string() + ": " + e.what(), 0);
    }
    if (doc.value("schema_version", 0) != 1) throw ParseError(src.string() + ": unsupported schema_version", 0);
    const auto md = m.stage("render", [&] { return render_report(doc); });
    emit(m, s.out, md, out);
    finish(m, s, default_manifest_for(s.out), err);
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"CGM distributional analysis: synthetic cohorts, metrics, glucodensities, regression", "cgmdist"};
    app.set_version_flag("--version", CGMDIST_VERSION);
    app.require_subcommand(1);
    Settings s;

    auto common = [&](CLI::App* sub, bool with_config = true) {
        if (with_config) sub->add_option("--config", s.config, "Flat JSON settings; flags take precedence")->check(CLI::ExistingFile);
        sub->add_option("--manifest", s.manifest, "Run manifest path");
        sub->add_option("--threads", s.threads, "Worker threads (0: all cores)");
    };
    auto smoothing = [&](CLI::App* sub) {
        sub->add_option("--knots-per-day", s.knots_per_day, "Spline knot intervals per day")->check(CLI::PositiveNumber);
        sub->add_option("--lambda", s.lambda, "Fixed smoothing penalty (default: GCV)")->check(CLI::NonNegativeNumber);
        sub->add_flag("--raw-glucose", s.raw_glucose, "Glucose channel from raw readings instead of the smooth");
        sub->add_option("--grid-size", s.grid_size, "Quantile grid points")->check(CLI::Range(1, 100000));
        sub->add_option("--tar-threshold", s.tar_threshold, "Hyperglycemia threshold, mg/dL");
    };
    auto scenario = [&](CLI::App* sub) {
        sub->add_option("--scenario", s.scenario, "Scenario JSON (flat keys)")->check(CLI::ExistingFile);
        sub->add_option("--preset", s.preset, "Named scenario when --scenario is absent");
        sub->add_option("--seed", s.seed, "Override the scenario seed");
        sub->add_option("--n-subjects", s.n_subjects, "Override the cohort size");
        sub->add_option("--days", s.days, "Override days per subject");
    };
    auto model = [&](CLI::App* sub) {
        sub->add_option("--k0", s.k0, "Cubic B-splines over quantile values")->check(CLI::Range(4, 64));
        sub->add_option("--l0", s.l0, "Cubic B-splines over probabilities")->check(CLI::Range(4, 64));
        sub->add_option("--criterion", s.criterion, "Smoothing selection")->check(CLI::IsMember({"gcv", "ubre"}));
        sub->add_option("--known-scale", s.known_scale, "Residual variance for UBRE")->check(CLI::PositiveNumber);
        sub->add_flag("--metrics-in-distributional", s.metrics_in_distributional,
                      "Keep AUC, MAGE, CONGA1 and TAR in models 3 to 5");
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort (CGM, subject and calibration CSVs)");
    synth->add_option("--config", s.scenario, "Scenario JSON (flat keys)")->check(CLI::ExistingFile);
    synth->add_option("--preset", s.preset, "Named scenario when --config is absent");
    synth->add_option("--seed", s.seed, "Override the scenario seed");
    synth->add_option("--n-subjects", s.n_subjects, "Override the cohort size");
    synth->add_option("--days", s.days, "Override days per subject");
    auto* synth_out = synth->add_option("--out-dir", s.out_dir, "Output directory");
    common(synth, false);

    auto* validate = app.add_subcommand("validate", "Check monitoring span and calibration rules");
    auto* validate_cgm = validate->add_option("--cgm", s.cgm, "CGM CSV")->check(CLI::ExistingFile);
    validate->add_option("--calibration", s.calibration, "Calibration CSV")->check(CLI::ExistingFile);
    validate->add_option("--out", s.out, "Report CSV (default: stdout)");
    common(validate);

    auto* metrics = app.add_subcommand("metrics", "Classic variability metrics, one row per subject");
    auto* metrics_cgm = metrics->add_option("--cgm", s.cgm, "CGM CSV")->check(CLI::ExistingFile);
    metrics->add_option("--tar-threshold", s.tar_threshold, "Hyperglycemia threshold, mg/dL");
    metrics->add_option("--out", s.out, "Metrics CSV (default: stdout)");
    common(metrics);

    auto* gd = app.add_subcommand("glucodensity", "Quantile profiles of glucose, speed and acceleration");
    auto* gd_cgm = gd->add_option("--cgm", s.cgm, "CGM CSV")->check(CLI::ExistingFile);
    gd->add_flag("--densities", s.densities, "Also emit univariate density grids");
    gd->add_option("--out", s.out, "JSON output (default: stdout)");
    smoothing(gd);
    common(gd);

    auto* heat = app.add_subcommand("heatmap", "Bivariate density grid of two channels as CSV");
    auto* heat_cgm = heat->add_option("--cgm", s.cgm, "CGM CSV")->check(CLI::ExistingFile);
    heat->add_option("--subject", s.subject, "Subject id (default: all subjects pooled)");
    heat->add_option("--x", s.x_channel, "Channel on rows")->check(CLI::IsMember({"glucose", "speed", "acceleration"}));
    heat->add_option("--y", s.y_channel, "Channel on columns")->check(CLI::IsMember({"glucose", "speed", "acceleration"}));
    heat->add_option("--grid", s.heat_grid, "Grid points per axis")->check(CLI::Range(2, 4096));
    heat->add_option("--out", s.out, "CSV output (default: stdout)");
    smoothing(heat);
    common(heat);

    auto* fitc = app.add_subcommand("fit", "Fit one model of the ladder for one outcome");
    fitc->add_option("--cgm", s.cgm, "CGM CSV")->check(CLI::ExistingFile);
    fitc->add_option("--subjects", s.subjects, "Subject CSV")->check(CLI::ExistingFile);
    auto* fit_outcome_opt = fitc->add_option("--outcome", s.outcome, "Outcome column");
    fitc->add_option("--model", s.model, "Model 1 to 5")->check(CLI::Range(1, 5));
    auto* fit_model_out = fitc->add_option("--out-model", s.out_model, "Model JSON path");
    auto* fit_diag_out = fitc->add_option("--out-diagnostics", s.out_diagnostics, "Diagnostics JSON path");
    model(fitc);
    smoothing(fitc);
    common(fitc);

    auto* ladder = app.add_subcommand("ladder", "Fit models 1 to 5 for every outcome");
    ladder->add_option("--cgm", s.cgm, "CGM CSV (with --subjects; otherwise a scenario is generated)")->check(CLI::ExistingFile);
    ladder->add_option("--subjects", s.subjects, "Subject CSV")->check(CLI::ExistingFile);
    scenario(ladder);
    ladder->add_option("--outcomes", s.outcomes, "Outcome columns (default: all)")->delimiter(',');
    ladder->add_option("--models", s.models, "Models to fit")->delimiter(',')->check(CLI::Range(1, 5));
    auto* ladder_out = ladder->add_option("--out-dir", s.out_dir, "Output directory");
    model(ladder);
    smoothing(ladder);
    common(ladder);

    auto* report = app.add_subcommand("report", "Render a ladder run as Markdown");
    auto* report_in = report->add_option("--ladder-dir", s.ladder_dir, "Directory written by `ladder`")->check(CLI::ExistingDirectory);
    report->add_option("--out", s.out, "Markdown output (default: stdout)");
    common(report);

    try {
        app.parse(argc, argv);
        CLI::App* sub = app.get_subcommands().front();
        if (!s.config.empty() && sub != synth) apply_config(*sub, s.config);

        if (sub == synth) {
            need(synth_out);
            return cmd_synth(s, out, err);
        }
        if (sub == validate) {
            need(validate_cgm);
            return cmd_validate(s, out, err);
        }
        if (sub == metrics) {
            need(metrics_cgm);
            return cmd_metrics(s, out, err);
        }
        if (sub == gd) {
            need(gd_cgm);
            return cmd_glucodensity(s, out, err);
        }
        if (sub == heat) {
            need(heat_cgm);
            return cmd_heatmap(s, out, err);
        }
        if (sub == fitc) {
            need(fit_outcome_opt);
            need(fit_model_out);
            need(fit_diag_out);
            return cmd_fit(s, out, err);
        }
        if (sub == ladder) {
            need(ladder_out);
            return cmd_ladder(s, out, err);
        }
        need(report_in);
        return cmd_report(s, out, err);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return 2;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace cgmdist::cli
