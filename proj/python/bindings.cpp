#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cgmdist/classic_metrics.hpp"
#include "cgmdist/cgm_data.hpp"
#include "cgmdist/dist_regression.hpp"
#include "cgmdist/errors.hpp"
#include "cgmdist/glucodensity.hpp"
#include "cgmdist/model_ladder.hpp"
#include "cgmdist/spline_smoother.hpp"
#include "cgmdist/synth.hpp"
#include "cli.hpp"

namespace py = pybind11;
using namespace cgmdist;

namespace {

std::string csv_of_series(const std::vector<GlucoseSeries>& s) {
    std::ostringstream out;
    write_cgm_csv(out, s);
    return out.str();
}

std::string csv_of_subjects(const SubjectTable& t) {
    std::ostringstream out;
    write_subject_csv(out, t);
    return out.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "CGM distributional analysis core";
    m.attr("__version__") = CGMDIST_VERSION;

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<RangeError>(m, "RangeError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<SingularFitError>(m, "SingularFitError", base.ptr());
    py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());
    py::register_exception<BandwidthError>(m, "BandwidthError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

    py::class_<GlucoseSeries>(m, "GlucoseSeries")
        .def(py::init([](std::string id, std::vector<double> t, std::vector<double> g, double interval) {
                 return GlucoseSeries(std::move(id), std::move(t), std::move(g), interval);
             }),
             py::arg("subject_id"), py::arg("times"), py::arg("glucose"), py::arg("nominal_interval") = kDefaultInterval)
        .def_property_readonly("subject_id", &GlucoseSeries::subject_id)
        .def_property_readonly("times", [](const GlucoseSeries& s) { return std::vector<double>(s.times().begin(), s.times().end()); })
        .def_property_readonly("glucose", [](const GlucoseSeries& s) { return std::vector<double>(s.glucose().begin(), s.glucose().end()); })
        .def_property_readonly("nominal_interval", &GlucoseSeries::nominal_interval)
        .def_property_readonly("span", &GlucoseSeries::span)
        .def("__len__", &GlucoseSeries::size)
        .def("__repr__", [](const GlucoseSeries& s) {
            return "<GlucoseSeries " + s.subject_id() + ", " + std::to_string(s.size()) + " readings>";
        });

    py::class_<SubjectRecord>(m, "SubjectRecord")
        .def_readonly("subject_id", &SubjectRecord::subject_id)
        .def_readonly("age", &SubjectRecord::age)
        .def_readonly("fpg_baseline", &SubjectRecord::fpg_baseline)
        .def_readonly("hba1c_baseline", &SubjectRecord::hba1c_baseline)
        .def_readonly("outcomes", &SubjectRecord::outcomes);
    py::class_<SubjectTable>(m, "SubjectTable")
        .def_readonly("outcome_names", &SubjectTable::outcome_names)
        .def_readonly("records", &SubjectTable::records);

    m.def("parse_cgm_csv", &parse_cgm_csv, py::arg("text"));
    m.def("write_cgm_csv", &csv_of_series, py::arg("series"));
    m.def("parse_subject_csv", &parse_subject_csv, py::arg("text"));
    m.def("write_subject_csv", &csv_of_subjects, py::arg("table"));

    py::class_<ValidationReport>(m, "ValidationReport")
        .def_readonly("valid", &ValidationReport::valid)
        .def_readonly("violations", &ValidationReport::violations);
    m.def(
        "validate_series",
        [](const GlucoseSeries& s, std::optional<std::vector<int>> log) {
            std::optional<CalibrationLog> l;
            if (log) l = CalibrationLog{*log};
            return validate_series(s, l);
        },
        py::arg("series"), py::arg("calibration") = py::none());
    m.def("monitored_days", &monitored_days);

    py::class_<MetricPanel>(m, "MetricPanel")
        .def_readonly("mean", &MetricPanel::mean)
        .def_readonly("sd", &MetricPanel::sd)
        .def_readonly("auc", &MetricPanel::auc)
        .def_readonly("mage", &MetricPanel::mage)
        .def_readonly("conga1", &MetricPanel::conga1)
        .def_readonly("modd", &MetricPanel::modd)
        .def_readonly("tar", &MetricPanel::tar)
        .def_readonly("threshold_hyper", &MetricPanel::threshold_hyper);
    m.def(
        "compute_metrics",
        [](const GlucoseSeries& s, double threshold) {
            MetricOptions o;
            o.tar_threshold = threshold;
            return compute_metrics(s, o);
        },
        py::arg("series"), py::arg("tar_threshold") = kDefaultHyperThreshold);
    m.def("auc", &auc);
    m.def("mage", &mage);
    m.def("conga", &conga, py::arg("series"), py::arg("hours") = 1.0);
    m.def("modd", &modd);
    m.def("tar", &tar, py::arg("series"), py::arg("threshold") = kDefaultHyperThreshold);

    py::class_<SmoothedTrajectory>(m, "SmoothedTrajectory")
        .def_property_readonly("smoothing_lambda", &SmoothedTrajectory::lambda)
        .def_property_readonly("edf", &SmoothedTrajectory::edf)
        .def_property_readonly("domain", [](const SmoothedTrajectory& t) { return std::pair(t.domain_lo(), t.domain_hi()); })
        .def("eval", &SmoothedTrajectory::eval, py::arg("t"), py::arg("deriv") = 0)
        .def("to_json", &trajectory_to_json);
    m.def(
        "fit_spline",
        [](const GlucoseSeries& s, std::optional<double> lambda, double knots_per_day) {
            SmootherOptions o;
            o.lambda = lambda;
            o.knots_per_day = knots_per_day;
            return fit_spline(s, o);
        },
        py::arg("series"), py::arg("smoothing_lambda") = py::none(), py::arg("knots_per_day") = 48.0);

    py::enum_<Channel>(m, "Channel")
        .value("glucose", Channel::glucose)
        .value("speed", Channel::speed)
        .value("acceleration", Channel::acceleration);
    py::class_<QuantileProfile>(m, "QuantileProfile")
        .def_readonly("grid", &QuantileProfile::grid)
        .def_readonly("values", &QuantileProfile::values)
        .def_readonly("channel", &QuantileProfile::channel);
    m.def(
        "quantile_profile",
        [](const std::vector<double>& v, std::size_t g) { return quantile_profile(v, g); },
        py::arg("values"), py::arg("grid_size") = kDefaultQuantileGrid);
    py::class_<ChannelProfiles>(m, "ChannelProfiles")
        .def_readonly("glucose", &ChannelProfiles::glucose)
        .def_readonly("speed", &ChannelProfiles::speed)
        .def_readonly("acceleration", &ChannelProfiles::acceleration);
    m.def(
        "build_channels",
        [](const GlucoseSeries& s, const SmoothedTrajectory& t, bool raw) {
            ChannelOptions o;
            o.raw_glucose = raw;
            return build_channels(s, t, o);
        },
        py::arg("series"), py::arg("trajectory"), py::arg("raw_glucose") = false);

    py::class_<DensityEstimate>(m, "DensityEstimate")
        .def_readonly("grid", &DensityEstimate::grid)
        .def_readonly("density", &DensityEstimate::density)
        .def_readonly("bandwidth", &DensityEstimate::bandwidth)
        .def("mass", &DensityEstimate::mass);
    m.def(
        "kde_univariate",
        [](const std::vector<double>& v, std::optional<double> h, std::size_t n) { return kde_univariate(v, h, n); },
        py::arg("values"), py::arg("bandwidth") = py::none(), py::arg("grid_size") = 512);
    py::class_<MultivariateDensityGrid>(m, "MultivariateDensityGrid")
        .def_readonly("axes", &MultivariateDensityGrid::axes)
        .def_readonly("density", &MultivariateDensityGrid::density)
        .def_readonly("bandwidth", &MultivariateDensityGrid::bandwidth)
        .def("mass", &MultivariateDensityGrid::mass);
    m.def(
        "kde_multivariate",
        [](const Eigen::MatrixXd& p, std::optional<Eigen::MatrixXd> h, std::size_t n) { return kde_multivariate(p, h, n); },
        py::arg("points"), py::arg("bandwidth") = py::none(), py::arg("grid_size") = 64);

    py::class_<FitDiagnostics>(m, "FitDiagnostics")
        .def_readonly("n", &FitDiagnostics::n)
        .def_readonly("rss", &FitDiagnostics::rss)
        .def_readonly("r_squared", &FitDiagnostics::r_squared)
        .def_readonly("adj_r_squared", &FitDiagnostics::adj_r_squared)
        .def_readonly("log_likelihood", &FitDiagnostics::log_likelihood)
        .def_readonly("ubre", &FitDiagnostics::ubre)
        .def_readonly("gcv", &FitDiagnostics::gcv)
        .def_readonly("edf", &FitDiagnostics::edf);

    py::class_<CohortScenario>(m, "CohortScenario")
        .def_static("preset", &preset_scenario, py::arg("name"))
        .def_static("from_json", &scenario_from_json, py::arg("text"))
        .def("to_json", &scenario_to_json)
        .def_readwrite("n_subjects", &CohortScenario::n_subjects)
        .def_readwrite("days", &CohortScenario::days)
        .def_readwrite("seed", &CohortScenario::seed);
    py::class_<SyntheticCohort>(m, "SyntheticCohort")
        .def_readonly("series", &SyntheticCohort::series)
        .def_readonly("subjects", &SyntheticCohort::subjects)
        .def_readonly("signal", &SyntheticCohort::signal);
    m.def("generate_cohort", &generate_cohort, py::arg("scenario"));

    py::class_<CohortData>(m, "CohortData").def_property_readonly("size", [](const CohortData& c) {
        return c.features.size();
    });
    m.def(
        "assemble_cohort",
        [](const std::vector<GlucoseSeries>& s, const SubjectTable& t, std::size_t threads) {
            AssembleOptions o;
            o.threads = threads;
            return assemble_cohort(s, t, o);
        },
        py::arg("series"), py::arg("subjects"), py::arg("threads") = 0);
    m.def(
        "run_model_ladder",
        [](const CohortData& c, std::vector<std::string> outcomes, std::size_t k0, std::size_t l0, bool keep_metrics) {
            LadderOptions o;
            o.k0 = k0;
            o.l0 = l0;
            o.metrics_in_distributional = keep_metrics;
            if (outcomes.empty()) outcomes = c.table.outcome_names;
            const auto t = run_model_ladder(c, outcomes, o);
            // {outcome: {model: diagnostics}}
            std::map<std::string, std::map<int, FitDiagnostics>> out;
            for (const auto& e : t.entries) out[e.outcome][e.model] = e.diagnostics;
            return out;
        },
        py::arg("cohort"), py::arg("outcomes") = std::vector<std::string>{}, py::arg("k0") = 8, py::arg("l0") = 8,
        py::arg("metrics_in_distributional") = false);

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "cgmdist");
            std::vector<const char*> argv;
            for (const auto& a : args) argv.push_back(a.c_str());
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line in-process; returns (exit_code, stdout, stderr).");
}
