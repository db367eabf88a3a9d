#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cgmdist {

/// Sensor range of the CGM device, mg/dL.
inline constexpr double kMinGlucose = 40.0;
inline constexpr double kMaxGlucose = 400.0;

/// Protocol minimum monitoring span, minutes (2 days).
inline constexpr double kMinSpanMinutes = 2880.0;
inline constexpr int kMinCalibrationsPerDay = 3;
inline constexpr double kDefaultInterval = 5.0;

struct Gap {
    std::size_t after_index;  // gap lies between readings after_index and after_index + 1
    double length;            // minutes
};

struct SeriesMetadata {
    /// Local wall-clock of the first reading, minutes since 1970-01-01 00:00 in the
    /// first reading's timezone. Integer-minute input stores the raw first value.
    double start_wallclock = 0.0;
    bool wallclock_from_iso = false;
    /// Spacings larger than 3x the nominal interval. Recorded, never interpolated.
    std::vector<Gap> gaps;
};

/// One subject's CGM record. Times are minutes since the first reading.
class GlucoseSeries {
public:
    /// Throws ValidationError when times are not strictly increasing or fewer than two
    /// readings exist, RangeError when a reading falls outside [40, 400].
    GlucoseSeries(std::string subject_id, std::vector<double> times, std::vector<double> glucose,
                  double nominal_interval = kDefaultInterval, SeriesMetadata metadata = {});

    const std::string& subject_id() const noexcept { return subject_id_; }
    std::span<const double> times() const noexcept { return times_; }
    std::span<const double> glucose() const noexcept { return glucose_; }
    double nominal_interval() const noexcept { return nominal_interval_; }
    const SeriesMetadata& metadata() const noexcept { return metadata_; }
    std::size_t size() const noexcept { return times_.size(); }
    double span() const noexcept { return times_.back() - times_.front(); }

    /// Calendar day (days since epoch, local) holding elapsed minute `t`.
    long day_of(double t) const;

    friend bool operator==(const GlucoseSeries&, const GlucoseSeries&) = default;

private:
    std::string subject_id_;
    std::vector<double> times_;
    std::vector<double> glucose_;
    double nominal_interval_;
    SeriesMetadata metadata_;
};

struct SubjectRecord {
    std::string subject_id;
    double age = 0.0;
    double fpg_baseline = 0.0;
    double hba1c_baseline = 0.0;
    /// Aligned with SubjectTable::outcome_names; nullopt marks a missing outcome.
    std::vector<std::optional<double>> outcomes;
};

struct SubjectTable {
    std::vector<std::string> outcome_names;
    std::vector<SubjectRecord> records;

    const SubjectRecord* find(std::string_view subject_id) const;
    /// Index of an outcome column; throws ConfigError for unknown names.
    std::size_t outcome_index(std::string_view name) const;
};

/// Capillary checks per calendar day; index 0 is the day of the first reading.
struct CalibrationLog {
    std::vector<int> daily_counts;
};

/// subject_id -> (calendar day number -> checks)
using CalibrationTable = std::map<std::string, std::map<long, int>>;

struct ValidationReport {
    bool valid = true;
    std::vector<std::string> violations;
};

/// Parses `subject_id,timestamp,glucose_mgdl`. Timestamps may be ISO-8601
/// (`YYYY-MM-DDTHH:MM[:SS][Z|+HH:MM]`) or numeric minutes. Series are returned in
/// order of first appearance.
std::vector<GlucoseSeries> parse_cgm_csv(std::string_view text);
std::vector<GlucoseSeries> read_cgm_csv(const std::filesystem::path& path);

/// Writes elapsed-minute timestamps at full precision, so parsing the output
/// reproduces every series bit for bit.
void write_cgm_csv(std::ostream& out, std::span<const GlucoseSeries> series);

SubjectTable parse_subject_csv(std::string_view text);
SubjectTable read_subject_csv(const std::filesystem::path& path);
void write_subject_csv(std::ostream& out, const SubjectTable& table);

/// Parses `subject_id,date,n_checks`; dates are ISO `YYYY-MM-DD` or integer day numbers
/// in the same frame as numeric CGM timestamps (day = floor(minute / 1440)).
CalibrationTable parse_calibration_csv(std::string_view text);
CalibrationTable read_calibration_csv(const std::filesystem::path& path);
void write_calibration_csv(std::ostream& out, const CalibrationTable& table);

/// Calendar days the record covers for a positive duration, counted from local midnight.
std::size_t monitored_days(const GlucoseSeries& series);

CalibrationLog align_calibration(const GlucoseSeries& series, const std::map<long, int>& by_day);

/// Valid iff the span covers two days and, when a log is given, every monitored day has
/// at least three calibrations. Violations are named `min-duration` and `calibration-day-N`.
ValidationReport validate_series(const GlucoseSeries& series,
                                 const std::optional<CalibrationLog>& log = std::nullopt);

/// Reads a whole file; throws ParseError if it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace cgmdist
