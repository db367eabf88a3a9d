#include "cgmdist/model_ladder.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "cgmdist/errors.hpp"
#include "cgmdist/parallel.hpp"

namespace cgmdist {

namespace {

constexpr std::array<std::string_view, 10> kCovariates = {
    "age", "fpg_baseline", "hba1c_baseline", "auc", "mage", "conga1", "tar", "modd", "mean", "sd"};

}  // namespace

CohortData assemble_cohort(std::span<const GlucoseSeries> series, const SubjectTable& table,
                           const AssembleOptions& options) {
    std::map<std::string, std::size_t, std::less<>> by_id;
    for (std::size_t i = 0; i < series.size(); ++i) by_id.emplace(series[i].subject_id(), i);

    CohortData cohort;
    cohort.table = table;
    std::vector<std::size_t> source(table.records.size());
    for (std::size_t r = 0; r < table.records.size(); ++r) {
        auto it = by_id.find(table.records[r].subject_id);
        if (it == by_id.end())
            throw ValidationError("subject '" + table.records[r].subject_id + "' has no CGM series");
        source[r] = it->second;
    }
    cohort.unmatched_series = series.size() - std::min(series.size(), table.records.size());

    cohort.features.resize(table.records.size());
    parallel_for(table.records.size(), options.threads, [&](std::size_t r) {
        const GlucoseSeries& s = series[source[r]];
        auto& f = cohort.features[r];
        f.subject_id = s.subject_id();
        const auto traj = fit_spline(s, options.smoother);
        f.smoothing_lambda = traj.lambda();
        f.smoothing_edf = traj.edf();
        f.metrics = compute_metrics(s, options.metrics);
        f.profiles = build_channels(s, traj, options.channels);
    });
    return cohort;
}

std::span<const std::string_view> covariate_names() { return kCovariates; }

std::optional<double> covariate_value(const SubjectRecord& record, const SubjectFeatures& f, std::string_view name) {
    if (name == "age") return record.age;
    if (name == "fpg_baseline") return record.fpg_baseline;
    if (name == "hba1c_baseline") return record.hba1c_baseline;
    if (name == "auc") return f.metrics.auc;
    if (name == "mage") return f.metrics.mage;
    if (name == "conga1") return f.metrics.conga1;
    if (name == "tar") return f.metrics.tar;
    if (name == "modd") return f.metrics.modd;
    if (name == "mean") return f.metrics.mean;
    if (name == "sd") return f.metrics.sd;
    throw ConfigError("unknown covariate '" + std::string(name) + "'");
}

ModelSpec ladder_spec(int model, const LadderOptions& options) {
    if (model < 1 || model > 5) throw ConfigError("model must be between 1 and 5");
    ModelSpec spec;
    spec.k0 = options.k0;
    spec.l0 = options.l0;
    spec.criterion = options.criterion;
    spec.known_scale = options.known_scale;
    spec.linear_terms = {"age", "fpg_baseline", "hba1c_baseline"};
    if (model == 2 || (model >= 3 && options.metrics_in_distributional))
        for (const char* m : {"auc", "mage", "conga1", "tar"}) spec.linear_terms.emplace_back(m);
    if (model >= 3) spec.channels.push_back(Channel::glucose);
    if (model >= 4) spec.channels.push_back(Channel::speed);
    if (model >= 5) spec.channels.push_back(Channel::acceleration);
    return spec;
}

OutcomeFit fit_outcome(const CohortData& cohort, std::string_view outcome, const ModelSpec& spec) {
    spec.validate();
    const std::size_t k = cohort.table.outcome_index(outcome);
    OutcomeFit out;
    std::vector<double> y;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < cohort.table.records.size(); ++i) {
        const auto& rec = cohort.table.records[i];
        if (!rec.outcomes[k]) continue;
        std::vector<double> x;
        bool complete = true;
        for (const auto& name : spec.linear_terms) {
            const auto v = covariate_value(rec, cohort.features[i], name);
            if (!v || !std::isfinite(*v)) {
                complete = false;
                break;
            }
            x.push_back(*v);
        }
        if (!complete) continue;
        out.rows.push_back(i);
        y.push_back(*rec.outcomes[k]);
        rows.push_back(std::move(x));
    }
    if (out.rows.empty())
        throw InsufficientDataError("outcome '" + std::string(outcome) + "' has no complete rows");

    const auto n = static_cast<Eigen::Index>(out.rows.size());
    Eigen::MatrixXd linear(n, static_cast<Eigen::Index>(spec.linear_terms.size()));
    std::vector<ChannelProfiles> profiles;
    profiles.reserve(out.rows.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& x = rows[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < x.size(); ++j) linear(i, static_cast<Eigen::Index>(j)) = x[j];
        profiles.push_back(cohort.features[out.rows[static_cast<std::size_t>(i)]].profiles);
    }
    const Design design = build_design(linear, profiles, spec);
    out.clamped = design.clamped;
    out.model = fit(design, y, spec);
    return out;
}

const LadderEntry& LadderTable::at(std::string_view outcome, int model) const {
    for (const auto& e : entries)
        if (e.outcome == outcome && e.model == model) return e;
    throw ConfigError("no ladder entry for outcome '" + std::string(outcome) + "', model " + std::to_string(model));
}

LadderTable run_model_ladder(const CohortData& cohort, std::span<const std::string> outcomes,
                             const LadderOptions& options) {
    if (outcomes.empty()) throw ConfigError("model ladder needs at least one outcome");
    for (int m : options.models) (void)ladder_spec(m, options);
    LadderTable table;
    table.outcomes.assign(outcomes.begin(), outcomes.end());
    table.models = options.models;
    table.entries.resize(outcomes.size() * options.models.size());
    parallel_for(table.entries.size(), options.threads, [&](std::size_t idx) {
        const std::size_t o = idx / options.models.size();
        const int m = options.models[idx % options.models.size()];
        auto result = fit_outcome(cohort, outcomes[o], ladder_spec(m, options));
        auto& e = table.entries[idx];
        e.outcome = outcomes[o];
        e.model = m;
        e.diagnostics = result.model.diagnostics;
        e.fitted = std::move(result.model);
        e.clamped = result.clamped;
    });
    return table;
}

}  // namespace cgmdist
