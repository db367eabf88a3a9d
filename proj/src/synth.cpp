#include "cgmdist/synth.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>

#include "cgmdist/errors.hpp"
#include "cgmdist/rng.hpp"
#include "text_util.hpp"

namespace cgmdist {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kOutcomeStreamBase = 1'000'000'007ULL;

struct Meal {
    double start, width, amplitude;
};

/// Latent glucose and its first two time derivatives.
struct Latent {
    double value, speed, acceleration;
};

struct SubjectModel {
    double baseline;
    double ripple_amplitude, ripple_phase, ripple_omega;
    std::vector<Meal> meals;

    Latent at(double t) const {
        Latent out{baseline, 0.0, 0.0};
        for (const auto& m : meals) {
            if (t <= m.start || t >= m.start + m.width) continue;
            // A sin^4(x), x = pi (t - start) / w
            const double k = kPi / m.width;
            const double x = k * (t - m.start);
            const double s = std::sin(x), c = std::cos(x);
            out.value += m.amplitude * s * s * s * s;
            out.speed += m.amplitude * 4.0 * s * s * s * c * k;
            out.acceleration += m.amplitude * (12.0 * s * s * c * c - 4.0 * s * s * s * s) * k * k;
        }
        if (ripple_amplitude != 0.0) {
            const double arg = ripple_omega * t + ripple_phase;
            out.value += ripple_amplitude * std::sin(arg);
            out.speed += ripple_amplitude * ripple_omega * std::cos(arg);
            out.acceleration -= ripple_amplitude * ripple_omega * ripple_omega * std::sin(arg);
        }
        return out;
    }
};

/// sum_g w(p_g) Q(p_g) / (G + 1) on the 100-point interior grid, Q the inf-quantile.
double quantile_functional(std::vector<double> v, bool spread) {
    std::sort(v.begin(), v.end());
    const std::size_t grid = 100;
    const double n = static_cast<double>(v.size());
    double total = 0.0;
    for (std::size_t g = 1; g <= grid; ++g) {
        const double p = static_cast<double>(g) / static_cast<double>(grid + 1);
        std::size_t k = 1;
        while (static_cast<double>(k) / n < p) ++k;
        total += (spread ? 2.0 * p - 1.0 : 1.0) * v[k - 1];
    }
    return total / static_cast<double>(grid + 1);
}

std::vector<double> zscores(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    std::vector<double> z(x.size(), 0.0);
    if (sd > 0.0)
        for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mean) / sd;
    return z;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("scenario: " + what);
}

}  // namespace

void CohortScenario::validate() const {
    require(n_subjects >= 1, "n_subjects must be positive");
    require(std::isfinite(days) && days > 0.0, "days must be positive");
    require(std::isfinite(interval) && interval > 0.0, "interval must be positive");
    for (double v : {baseline_mean, baseline_sd, meals_per_day, meal_amplitude_mean, meal_amplitude_sd, meal_width_mean,
                     meal_width_sd, meal_time_jitter, ripple_amplitude_mean, ripple_amplitude_sd, ripple_period, ripple_period_sd, noise_sd,
                     noise_ar})
        require(std::isfinite(v), "parameters must be finite");
    require(baseline_sd >= 0 && meal_amplitude_sd >= 0 && meal_width_sd >= 0 && noise_sd >= 0 &&
                meal_time_jitter >= 0 && ripple_amplitude_sd >= 0 && ripple_period_sd >= 0,
            "standard deviations must be nonnegative");
    require(meals_per_day >= 0.0, "meals_per_day must be nonnegative");
    require(meal_width_mean > 0.0, "meal_width_mean must be positive");
    require(ripple_period > 0.0, "ripple_period must be positive");
    require(noise_ar > -1.0 && noise_ar < 1.0, "noise_ar must lie in (-1, 1)");
    require(calibrations_per_day >= 0, "calibrations_per_day must be nonnegative");
    for (const auto& o : outcomes) {
        require(!o.name.empty(), "outcome names must be nonempty");
        for (double v : {o.intercept, o.age, o.fpg, o.hba1c, o.glucose, o.speed, o.acceleration, o.noise_sd})
            require(std::isfinite(v), "outcome coefficients must be finite");
        require(o.noise_sd >= 0.0, "outcome noise_sd must be nonnegative");
        require(o.missing_fraction >= 0.0 && o.missing_fraction < 1.0, "missing_fraction must lie in [0, 1)");
    }
}

SyntheticCohort generate_cohort(const CohortScenario& sc) {
    sc.validate();
    SyntheticCohort cohort;
    const std::size_t n = sc.n_subjects;
    const auto readings = static_cast<std::size_t>(std::floor(sc.days * 1440.0 / sc.interval + 1e-9)) + 1;
    const auto meal_days = static_cast<std::size_t>(std::ceil(sc.days)) + 1;
    const auto meals_per_day = static_cast<std::size_t>(std::llround(sc.meals_per_day));

    cohort.series.reserve(n);
    cohort.features.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(CounterRng::derive(sc.seed, i));
        SubjectModel model;
        model.baseline = rng.normal(sc.baseline_mean, sc.baseline_sd);
        const double amplitude = std::max(0.0, rng.normal(sc.meal_amplitude_mean, sc.meal_amplitude_sd));
        const double width = std::max(0.3 * sc.meal_width_mean, rng.normal(sc.meal_width_mean, sc.meal_width_sd));
        model.ripple_amplitude = std::abs(rng.normal(sc.ripple_amplitude_mean, sc.ripple_amplitude_sd));
        model.ripple_phase = rng.uniform(0.0, 2.0 * kPi);
        const double period = std::max(0.25 * sc.ripple_period, rng.normal(sc.ripple_period, sc.ripple_period_sd));
        model.ripple_omega = 2.0 * kPi / period;
        for (std::size_t d = 0; d < meal_days; ++d) {
            for (std::size_t m = 0; m < meals_per_day; ++m) {
                const double hour = 7.0 + 14.0 * (static_cast<double>(m) + 0.5) / static_cast<double>(meals_per_day);
                const double center = static_cast<double>(d) * 1440.0 + hour * 60.0 + rng.normal(0.0, sc.meal_time_jitter);
                const double w = width * std::max(0.5, 1.0 + 0.1 * rng.normal());
                const double a = amplitude * std::max(0.0, 1.0 + 0.15 * rng.normal());
                model.meals.push_back({center - 0.5 * w, w, a});
            }
        }

        std::vector<double> times(readings), glucose(readings), level(readings), speed(readings), accel(readings);
        double noise = rng.normal(0.0, sc.noise_sd);
        const double innovation = sc.noise_sd * std::sqrt(1.0 - sc.noise_ar * sc.noise_ar);
        std::size_t clipped = 0;
        for (std::size_t j = 0; j < readings; ++j) {
            const double t = static_cast<double>(j) * sc.interval;
            if (j > 0) noise = sc.noise_ar * noise + rng.normal(0.0, innovation);
            const Latent lat = model.at(t);
            times[j] = t;
            level[j] = lat.value;
            speed[j] = lat.speed;
            accel[j] = lat.acceleration;
            double g = lat.value + noise;
            if (g < kMinGlucose || g > kMaxGlucose) ++clipped;
            glucose[j] = std::clamp(g, kMinGlucose, kMaxGlucose);
        }
        if (2 * clipped > readings)
            throw ConfigError("scenario clips more than half the readings of subject " + std::to_string(i));

        auto& f = cohort.features[i];
        f.glucose = quantile_functional(level, false);
        f.speed = quantile_functional(speed, true);
        f.acceleration = quantile_functional(accel, true);
        double mean_level = 0.0;
        for (double v : level) mean_level += v;
        mean_level /= static_cast<double>(readings);
        f.age = std::clamp(rng.normal(55.0, 15.0), 18.0, 90.0);
        f.fpg = 0.9 * model.baseline + 10.0 + rng.normal(0.0, 6.0);
        f.hba1c = (mean_level + 46.7) / 28.7 + rng.normal(0.0, 0.15);

        char id[32];
        std::snprintf(id, sizeof id, "S%04zu", i + 1);
        cohort.series.emplace_back(id, std::move(times), std::move(glucose), sc.interval);
        const auto ndays = monitored_days(cohort.series.back());
        auto& cal = cohort.calibration[id];
        for (std::size_t d = 0; d < ndays; ++d)
            cal[static_cast<long>(d)] = sc.calibrations_per_day + static_cast<int>(rng.uniform() < 0.3);
    }

    cohort.subjects.records.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& r = cohort.subjects.records[i];
        r.subject_id = cohort.series[i].subject_id();
        r.age = cohort.features[i].age;
        r.fpg_baseline = cohort.features[i].fpg;
        r.hba1c_baseline = cohort.features[i].hba1c;
    }

    auto column = [&](double TrueFeatures::*field) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = cohort.features[i].*field;
        return sc.standardize ? zscores(v) : v;
    };
    const auto z_age = column(&TrueFeatures::age), z_fpg = column(&TrueFeatures::fpg),
               z_a1c = column(&TrueFeatures::hba1c), z_glu = column(&TrueFeatures::glucose),
               z_spd = column(&TrueFeatures::speed), z_acc = column(&TrueFeatures::acceleration);

    for (std::size_t k = 0; k < sc.outcomes.size(); ++k) {
        const auto& o = sc.outcomes[k];
        cohort.subjects.outcome_names.push_back(o.name);
        CounterRng rng(CounterRng::derive(sc.seed, kOutcomeStreamBase + k));
        std::vector<double> signal(n);
        for (std::size_t i = 0; i < n; ++i) {
            signal[i] = o.intercept + o.age * z_age[i] + o.fpg * z_fpg[i] + o.hba1c * z_a1c[i] + o.glucose * z_glu[i] +
                        o.speed * z_spd[i] + o.acceleration * z_acc[i];
            const double value = signal[i] + rng.normal(0.0, o.noise_sd);
            const bool missing = rng.uniform() < o.missing_fraction;
            cohort.subjects.records[i].outcomes.push_back(missing ? std::nullopt : std::optional<double>(value));
        }
        cohort.signal.push_back(std::move(signal));
    }
    return cohort;
}

namespace {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

std::vector<std::string> split_names(const std::string& s) {
    std::vector<std::string> out;
    for (auto part : text::split(s))
        if (!part.empty()) out.emplace_back(part);
    return out;
}

}  // namespace

CohortScenario scenario_from_json(std::string_view text) {
    CohortScenario sc;
    try {
        const auto j = nlohmann::json::parse(text);
        if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
        static const std::vector<std::string> known = {
            "n_subjects", "days", "interval", "seed", "baseline_mean", "baseline_sd", "meals_per_day",
            "meal_amplitude_mean", "meal_amplitude_sd", "meal_width_mean", "meal_width_sd", "meal_time_jitter",
            "ripple_amplitude_mean", "ripple_amplitude_sd", "ripple_period", "ripple_period_sd", "noise_sd", "noise_ar",
            "calibrations_per_day", "outcomes", "standardize", "preset"};
        for (const auto& [key, value] : j.items()) {
            if (key.rfind("outcome.", 0) == 0) continue;
            if (std::find(known.begin(), known.end(), key) == known.end())
                throw ConfigError("unknown scenario key '" + key + "'");
        }
        if (j.contains("preset")) sc = preset_scenario(j.at("preset").get<std::string>());
        read_field(j, "n_subjects", sc.n_subjects);
        read_field(j, "days", sc.days);
        read_field(j, "interval", sc.interval);
        read_field(j, "seed", sc.seed);
        read_field(j, "baseline_mean", sc.baseline_mean);
        read_field(j, "baseline_sd", sc.baseline_sd);
        read_field(j, "meals_per_day", sc.meals_per_day);
        read_field(j, "meal_amplitude_mean", sc.meal_amplitude_mean);
        read_field(j, "meal_amplitude_sd", sc.meal_amplitude_sd);
        read_field(j, "meal_width_mean", sc.meal_width_mean);
        read_field(j, "meal_width_sd", sc.meal_width_sd);
        read_field(j, "meal_time_jitter", sc.meal_time_jitter);
        read_field(j, "ripple_amplitude_mean", sc.ripple_amplitude_mean);
        read_field(j, "ripple_amplitude_sd", sc.ripple_amplitude_sd);
        read_field(j, "ripple_period", sc.ripple_period);
        read_field(j, "ripple_period_sd", sc.ripple_period_sd);
        read_field(j, "noise_sd", sc.noise_sd);
        read_field(j, "noise_ar", sc.noise_ar);
        read_field(j, "calibrations_per_day", sc.calibrations_per_day);
        read_field(j, "standardize", sc.standardize);
        if (j.contains("outcomes")) {
            std::vector<OutcomeLink> links;
            for (const auto& name : split_names(j.at("outcomes").get<std::string>())) {
                OutcomeLink link;
                for (const auto& existing : sc.outcomes)
                    if (existing.name == name) link = existing;
                link.name = name;
                links.push_back(link);
            }
            sc.outcomes = std::move(links);
        }
        for (auto& o : sc.outcomes) {
            const std::string prefix = "outcome." + o.name + ".";
            for (const auto& [key, value] : j.items()) {
                if (key.rfind(prefix, 0) != 0) continue;
                const std::string field = key.substr(prefix.size());
                const double v = value.get<double>();
                if (field == "intercept") o.intercept = v;
                else if (field == "age") o.age = v;
                else if (field == "fpg") o.fpg = v;
                else if (field == "hba1c") o.hba1c = v;
                else if (field == "glucose") o.glucose = v;
                else if (field == "speed") o.speed = v;
                else if (field == "acceleration") o.acceleration = v;
                else if (field == "noise_sd") o.noise_sd = v;
                else if (field == "missing_fraction") o.missing_fraction = v;
                else throw ConfigError("unknown outcome field '" + key + "'");
            }
        }
        for (const auto& [key, value] : j.items()) {
            if (key.rfind("outcome.", 0) != 0) continue;
            const bool matched = std::any_of(sc.outcomes.begin(), sc.outcomes.end(), [&](const OutcomeLink& o) {
                return key.rfind("outcome." + o.name + ".", 0) == 0;
            });
            if (!matched) throw ConfigError("key '" + key + "' names an outcome missing from 'outcomes'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario JSON: ") + e.what());
    }
    sc.validate();
    return sc;
}

std::string scenario_to_json(const CohortScenario& sc) {
    nlohmann::ordered_json j;
    j["n_subjects"] = sc.n_subjects;
    j["days"] = sc.days;
    j["interval"] = sc.interval;
    j["seed"] = sc.seed;
    j["baseline_mean"] = sc.baseline_mean;
    j["baseline_sd"] = sc.baseline_sd;
    j["meals_per_day"] = sc.meals_per_day;
    j["meal_amplitude_mean"] = sc.meal_amplitude_mean;
    j["meal_amplitude_sd"] = sc.meal_amplitude_sd;
    j["meal_width_mean"] = sc.meal_width_mean;
    j["meal_width_sd"] = sc.meal_width_sd;
    j["meal_time_jitter"] = sc.meal_time_jitter;
    j["ripple_amplitude_mean"] = sc.ripple_amplitude_mean;
    j["ripple_amplitude_sd"] = sc.ripple_amplitude_sd;
    j["ripple_period"] = sc.ripple_period;
    j["ripple_period_sd"] = sc.ripple_period_sd;
    j["noise_sd"] = sc.noise_sd;
    j["noise_ar"] = sc.noise_ar;
    j["calibrations_per_day"] = sc.calibrations_per_day;
    j["standardize"] = sc.standardize;
    std::string names;
    for (const auto& o : sc.outcomes) names += (names.empty() ? "" : ",") + o.name;
    j["outcomes"] = names;
    for (const auto& o : sc.outcomes) {
        const std::string p = "outcome." + o.name + ".";
        j[p + "intercept"] = o.intercept;
        j[p + "age"] = o.age;
        j[p + "fpg"] = o.fpg;
        j[p + "hba1c"] = o.hba1c;
        j[p + "glucose"] = o.glucose;
        j[p + "speed"] = o.speed;
        j[p + "acceleration"] = o.acceleration;
        j[p + "noise_sd"] = o.noise_sd;
        j[p + "missing_fraction"] = o.missing_fraction;
    }
    return j.dump(2);
}

CohortScenario preset_scenario(std::string_view name) {
    CohortScenario sc;
    const std::vector<std::string> four = {"hba1c_5y", "hba1c_8y", "fpg_5y", "fpg_8y"};
    auto links = [&](auto&& make) {
        for (const auto& n : four) sc.outcomes.push_back(make(n));
    };
    if (name == "null") {
        sc.n_subjects = 500;
        links([](const std::string& n) { return OutcomeLink{n, 0, 0, 0, 0, 0, 0, 0, 1.0, 0.0}; });
    } else if (name == "hba1c_only") {
        sc.n_subjects = 300;
        links([](const std::string& n) { return OutcomeLink{n, 6.0, 0, 0, 0.8, 0, 0, 0, 0.4, 0.0}; });
    } else if (name == "glucose_age") {
        sc.n_subjects = 300;
        sc.standardize = false;
        links([](const std::string& n) { return OutcomeLink{n, 2.0, 1.5, 0, 0, 1.0, 0, 0, 0.01, 0.0}; });
    } else if (name == "ladder") {
        sc.n_subjects = 300;
        sc.ripple_amplitude_mean = 5.0;
        sc.ripple_amplitude_sd = 4.0;
        sc.ripple_period = 180.0;
        sc.ripple_period_sd = 50.0;
        links([](const std::string& n) { return OutcomeLink{n, 6.0, 0.2, 0.2, 0.4, 0.3, 0.6, 1.5, 0.4, 0.0}; });
    } else if (name == "default") {
        sc.ripple_amplitude_mean = 5.0;
        sc.ripple_amplitude_sd = 4.0;
        sc.ripple_period = 180.0;
        sc.ripple_period_sd = 50.0;
        sc.outcomes = {OutcomeLink{"hba1c_5y", 5.8, 0.15, 0.1, 0.5, 0.3, 0.25, 0.25, 0.35, 0.05},
                       OutcomeLink{"hba1c_8y", 5.9, 0.15, 0.1, 0.45, 0.25, 0.2, 0.3, 0.45, 0.1},
                       OutcomeLink{"fpg_5y", 100.0, 2.0, 6.0, 2.0, 4.0, 3.0, 3.0, 8.0, 0.05},
                       OutcomeLink{"fpg_8y", 103.0, 2.5, 5.0, 2.0, 4.0, 3.0, 4.0, 10.0, 0.1}};
    } else {
        throw ConfigError("unknown scenario preset '" + std::string(name) + "'");
    }
    return sc;
}

}  // namespace cgmdist
