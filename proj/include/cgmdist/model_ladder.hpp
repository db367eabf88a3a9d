#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgmdist/cgm_data.hpp"
#include "cgmdist/classic_metrics.hpp"
#include "cgmdist/dist_regression.hpp"
#include "cgmdist/glucodensity.hpp"
#include "cgmdist/spline_smoother.hpp"

namespace cgmdist {

/// Everything the regression stage needs about one subject.
struct SubjectFeatures {
    std::string subject_id;
    MetricPanel metrics;
    ChannelProfiles profiles;
    double smoothing_lambda = 0.0;
    double smoothing_edf = 0.0;
};

/// Subject table plus per-subject features, aligned by position.
struct CohortData {
    SubjectTable table;
    std::vector<SubjectFeatures> features;
    std::size_t unmatched_series = 0;  // series without a subject record (ignored)
};

struct AssembleOptions {
    SmootherOptions smoother;
    ChannelOptions channels;
    MetricOptions metrics;
    std::size_t threads = 0;  // 0: all cores
};

/// Smooths every series, computes its metrics and channel profiles. Every subject record needs
/// a series with the same id (ValidationError otherwise).
CohortData assemble_cohort(std::span<const GlucoseSeries> series, const SubjectTable& table,
                           const AssembleOptions& options = {});

/// Names accepted as linear covariates.
std::span<const std::string_view> covariate_names();

/// Value of a named covariate for a subject; nullopt when missing (MODD on short series).
/// Throws ConfigError for unknown names.
std::optional<double> covariate_value(const SubjectRecord& record, const SubjectFeatures& features,
                                      std::string_view name);

struct LadderOptions {
    std::size_t k0 = 8;
    std::size_t l0 = 8;
    Criterion criterion = Criterion::gcv;
    std::optional<double> known_scale;
    /// Keep the classic metrics of model 2 as covariates in models 3 to 5.
    bool metrics_in_distributional = false;
    std::vector<int> models{1, 2, 3, 4, 5};
    std::size_t threads = 0;
};

/// Model 1: age, FPG, HbA1c. Model 2: + AUC, MAGE, CONGA1, TAR. Models 3 to 5: model 1 plus
/// the glucose, then speed, then acceleration channels.
ModelSpec ladder_spec(int model, const LadderOptions& options = {});

/// A fitted model together with the rows it used.
struct OutcomeFit {
    DistRegressionModel model;
    std::vector<std::size_t> rows;  // cohort positions kept after listwise deletion
    std::size_t clamped = 0;
};

/// Listwise deletion of rows missing the outcome or any linear covariate, then fit.
OutcomeFit fit_outcome(const CohortData& cohort, std::string_view outcome, const ModelSpec& spec);

struct LadderEntry {
    std::string outcome;
    int model = 0;
    FitDiagnostics diagnostics;
    DistRegressionModel fitted;
    std::size_t clamped = 0;
};

struct LadderTable {
    std::vector<std::string> outcomes;
    std::vector<int> models;
    std::vector<LadderEntry> entries;  // outcome-major

    const LadderEntry& at(std::string_view outcome, int model) const;
};

/// Fits every requested model for each outcome; outcomes run in parallel.
LadderTable run_model_ladder(const CohortData& cohort, std::span<const std::string> outcomes,
                             const LadderOptions& options = {});

}  // namespace cgmdist
