#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cgmdist/cgm_data.hpp"

namespace cgmdist {

/// How one synthetic outcome depends on subject characteristics. Coefficients multiply
/// cohort-standardized (z-scored) quantities unless the scenario sets standardize = false.
struct OutcomeLink {
    std::string name;
    double intercept = 0.0;
    double age = 0.0;
    double fpg = 0.0;
    double hba1c = 0.0;
    double glucose = 0.0;       // integral of the glucose quantile function (mean level)
    double speed = 0.0;         // integral of (2p - 1) times the speed quantile function (spread)
    double acceleration = 0.0;  // same functional of the acceleration quantile function
    double noise_sd = 0.1;
    double missing_fraction = 0.0;
};

/// Cohort generator parameters. Times are in minutes, glucose in mg/dL.
struct CohortScenario {
    std::size_t n_subjects = 300;
    double days = 3.0;
    double interval = 5.0;
    std::uint64_t seed = 20240601;

    double baseline_mean = 100.0;
    double baseline_sd = 12.0;
    double meals_per_day = 3.0;
    double meal_amplitude_mean = 45.0;
    double meal_amplitude_sd = 12.0;
    double meal_width_mean = 150.0;
    double meal_width_sd = 35.0;
    double meal_time_jitter = 30.0;
    /// Sinusoidal ripple with subject-specific amplitude; sharpens acceleration without moving
    /// the glucose level much.
    double ripple_amplitude_mean = 0.0;
    double ripple_amplitude_sd = 0.0;
    double ripple_period = 90.0;
    double ripple_period_sd = 0.0;
    double noise_sd = 2.0;
    double noise_ar = 0.5;  // AR(1) coefficient of sensor noise

    int calibrations_per_day = 3;
    std::vector<OutcomeLink> outcomes;
    /// z-score features across the cohort before applying outcome coefficients.
    bool standardize = true;

    /// Throws ConfigError on non-finite or out-of-range parameters.
    void validate() const;
};

/// Per-subject quantities the outcome links use, computed from the noise-free trajectory with
/// analytic derivatives at the reading times.
struct TrueFeatures {
    double age = 0.0;
    double fpg = 0.0;
    double hba1c = 0.0;
    double glucose = 0.0;
    double speed = 0.0;
    double acceleration = 0.0;
};

struct SyntheticCohort {
    std::vector<GlucoseSeries> series;
    SubjectTable subjects;
    CalibrationTable calibration;
    std::vector<TrueFeatures> features;
    /// Noise-free outcome values, [outcome][subject].
    std::vector<std::vector<double>> signal;
};

/// Baseline + squared raised-cosine meal pulses (continuous second derivative) + ripple +
/// AR(1) noise, clipped to the sensor range. Throws ConfigError when a subject would have more
/// than half its readings clipped. Same scenario, same output, byte for byte.
SyntheticCohort generate_cohort(const CohortScenario& scenario);

/// Flat JSON object; keys match the field names, outcomes as "outcomes": "a,b" plus
/// "outcome.<name>.<field>" entries.
CohortScenario scenario_from_json(std::string_view json);
std::string scenario_to_json(const CohortScenario& scenario);

/// Named scenarios: "null", "hba1c_only", "glucose_age", "ladder", "default".
CohortScenario preset_scenario(std::string_view name);

}  // namespace cgmdist
