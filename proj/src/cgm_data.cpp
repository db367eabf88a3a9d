#include "cgmdist/cgm_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "cgmdist/errors.hpp"
#include "text_util.hpp"

namespace cgmdist {

namespace {

constexpr double kMinutesPerDay = 1440.0;

long days_from_civil(long y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

std::optional<int> digits(std::string_view s, std::size_t pos, std::size_t n) {
    if (pos + n > s.size()) return std::nullopt;
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (s[i] < '0' || s[i] > '9') return std::nullopt;
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

std::optional<long> parse_iso_date(std::string_view s) {
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    auto y = digits(s, 0, 4), mo = digits(s, 5, 2), d = digits(s, 8, 2);
    if (!y || !mo || !d || *mo < 1 || *mo > 12 || *d < 1 || *d > 31) return std::nullopt;
    return days_from_civil(*y, static_cast<unsigned>(*mo), static_cast<unsigned>(*d));
}

struct Stamp {
    double utc;    // minutes, used for ordering and elapsed time
    double local;  // minutes, wall clock in the stamp's own offset
    bool iso;
};

std::optional<Stamp> parse_timestamp(std::string_view s) {
    if (auto v = text::parse_double(s)) return Stamp{*v, *v, false};
    auto day = parse_iso_date(s);
    if (!day || s.size() < 16 || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') return std::nullopt;
    auto hh = digits(s, 11, 2), mm = digits(s, 14, 2);
    if (!hh || !mm || *hh > 23 || *mm > 59) return std::nullopt;
    double seconds = 0.0;
    std::size_t pos = 16;
    if (pos < s.size() && s[pos] == ':') {
        std::size_t end = pos + 1;
        while (end < s.size() && (std::isdigit(static_cast<unsigned char>(s[end])) || s[end] == '.')) ++end;
        auto sec = text::parse_double(s.substr(pos + 1, end - pos - 1));
        if (!sec || *sec < 0 || *sec >= 61) return std::nullopt;
        seconds = *sec;
        pos = end;
    }
    double offset = 0.0;
    if (pos < s.size()) {
        auto tz = s.substr(pos);
        if (tz == "Z") {
            offset = 0.0;
        } else if ((tz[0] == '+' || tz[0] == '-') && (tz.size() == 6 || tz.size() == 5 || tz.size() == 3)) {
            auto oh = digits(tz, 1, 2);
            std::optional<int> om = 0;
            if (tz.size() == 6) om = tz[3] == ':' ? digits(tz, 4, 2) : std::nullopt;
            if (tz.size() == 5) om = digits(tz, 3, 2);
            if (!oh || !om) return std::nullopt;
            offset = (tz[0] == '-' ? -1.0 : 1.0) * (*oh * 60.0 + *om);
        } else {
            return std::nullopt;
        }
    }
    const double local = static_cast<double>(*day) * kMinutesPerDay + *hh * 60.0 + *mm + seconds / 60.0;
    return Stamp{local - offset, local, true};
}

void check_header(std::string_view line, std::initializer_list<std::string_view> expected,
                  std::size_t lineno) {
    auto fields = text::split(line);
    bool ok = fields.size() >= expected.size();
    std::size_t i = 0;
    for (auto e : expected) {
        if (!ok) break;
        ok = fields[i++] == e;
    }
    if (!ok) {
        std::string want;
        for (auto e : expected) want += (want.empty() ? "" : ",") + std::string(e);
        throw ParseError("expected header '" + want + "'", lineno);
    }
}

}  // namespace

GlucoseSeries::GlucoseSeries(std::string subject_id, std::vector<double> times,
                             std::vector<double> glucose, double nominal_interval,
                             SeriesMetadata metadata)
    : subject_id_(std::move(subject_id)),
      times_(std::move(times)),
      glucose_(std::move(glucose)),
      nominal_interval_(nominal_interval),
      metadata_(std::move(metadata)) {
    if (times_.size() != glucose_.size())
        throw ValidationError("series " + subject_id_ + ": times and glucose differ in length");
    if (times_.size() < 2) throw ValidationError("series " + subject_id_ + ": needs at least two readings");
    if (!(nominal_interval_ > 0.0)) throw ValidationError("nominal interval must be positive");
    for (std::size_t i = 0; i < times_.size(); ++i) {
        if (!std::isfinite(times_[i])) throw ValidationError("series " + subject_id_ + ": non-finite time");
        if (i > 0 && !(times_[i] > times_[i - 1]))
            throw ValidationError("series " + subject_id_ + ": times not strictly increasing at index " +
                                  std::to_string(i));
        const double g = glucose_[i];
        if (!(g >= kMinGlucose && g <= kMaxGlucose))
            throw RangeError("series " + subject_id_ + ": glucose " + text::format_sig6(g) +
                                 " outside [40, 400] at index " + std::to_string(i),
                             subject_id_, 0);
    }
    metadata_.gaps.clear();
    for (std::size_t i = 1; i < times_.size(); ++i) {
        const double dt = times_[i] - times_[i - 1];
        if (dt > 3.0 * nominal_interval_) metadata_.gaps.push_back({i - 1, dt});
    }
}

long GlucoseSeries::day_of(double t) const {
    return static_cast<long>(std::floor((metadata_.start_wallclock + t) / kMinutesPerDay));
}

const SubjectRecord* SubjectTable::find(std::string_view subject_id) const {
    for (const auto& r : records)
        if (r.subject_id == subject_id) return &r;
    return nullptr;
}

std::size_t SubjectTable::outcome_index(std::string_view name) const {
    for (std::size_t i = 0; i < outcome_names.size(); ++i)
        if (outcome_names[i] == name) return i;
    throw ConfigError("unknown outcome '" + std::string(name) + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<GlucoseSeries> parse_cgm_csv(std::string_view text) {
    struct Row {
        Stamp stamp;
        double glucose;
        std::size_t line;
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<Row>> rows;
    bool header_seen = false;

    text::for_each_line(text, [&](std::size_t lineno, std::string_view line) {
        if (!header_seen) {
            check_header(line, {"subject_id", "timestamp", "glucose_mgdl"}, lineno);
            header_seen = true;
            return;
        }
        auto f = text::split(line);
        if (f.size() != 3 || f[0].empty()) throw ParseError("expected 3 fields", lineno);
        auto stamp = parse_timestamp(f[1]);
        if (!stamp) throw ParseError("bad timestamp '" + std::string(f[1]) + "'", lineno);
        auto g = text::parse_double(f[2]);
        if (!g || !std::isfinite(*g)) throw ParseError("bad glucose value '" + std::string(f[2]) + "'", lineno);
        std::string id(f[0]);
        if (!(*g >= kMinGlucose && *g <= kMaxGlucose))
            throw RangeError("line " + std::to_string(lineno) + ": glucose " + std::string(f[2]) +
                                 " for subject " + id + " outside sensor range [40, 400]",
                             id, lineno);
        auto [it, inserted] = rows.try_emplace(id);
        if (inserted) order.push_back(id);
        it->second.push_back({*stamp, *g, lineno});
    });
    if (!header_seen) throw ParseError("empty CGM file", 0);

    std::vector<GlucoseSeries> out;
    out.reserve(order.size());
    for (const auto& id : order) {
        auto& r = rows[id];
        for (const auto& row : r)
            if (row.stamp.iso != r.front().stamp.iso)
                throw ParseError("subject " + id + " mixes ISO and numeric timestamps", row.line);
        std::stable_sort(r.begin(), r.end(), [](const Row& a, const Row& b) { return a.stamp.utc < b.stamp.utc; });
        for (std::size_t i = 1; i < r.size(); ++i)
            if (!(r[i].stamp.utc > r[i - 1].stamp.utc))
                throw ValidationError("subject " + id + ": duplicate timestamp at lines " +
                                      std::to_string(r[i - 1].line) + " and " + std::to_string(r[i].line));
        std::vector<double> t(r.size()), g(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) {
            t[i] = r[i].stamp.utc - r.front().stamp.utc;
            g[i] = r[i].glucose;
        }
        SeriesMetadata meta;
        meta.start_wallclock = r.front().stamp.local;
        meta.wallclock_from_iso = r.front().stamp.iso;
        out.emplace_back(id, std::move(t), std::move(g), kDefaultInterval, std::move(meta));
    }
    return out;
}

std::vector<GlucoseSeries> read_cgm_csv(const std::filesystem::path& path) {
    return parse_cgm_csv(read_text_file(path));
}

void write_cgm_csv(std::ostream& out, std::span<const GlucoseSeries> series) {
    out << "subject_id,timestamp,glucose_mgdl\n";
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.size(); ++i)
            out << s.subject_id() << ',' << text::format_exact(s.times()[i]) << ','
                << text::format_exact(s.glucose()[i]) << '\n';
}

SubjectTable parse_subject_csv(std::string_view text) {
    SubjectTable table;
    bool header_seen = false;
    std::size_t ncols = 0;
    text::for_each_line(text, [&](std::size_t lineno, std::string_view line) {
        if (!header_seen) {
            check_header(line, {"subject_id", "age", "fpg_baseline", "hba1c_baseline"}, lineno);
            auto f = text::split(line);
            ncols = f.size();
            for (std::size_t i = 4; i < f.size(); ++i) table.outcome_names.emplace_back(f[i]);
            header_seen = true;
            return;
        }
        auto f = text::split(line);
        if (f.size() != ncols || f[0].empty())
            throw ParseError("expected " + std::to_string(ncols) + " fields", lineno);
        SubjectRecord rec;
        rec.subject_id = std::string(f[0]);
        double* cov[] = {&rec.age, &rec.fpg_baseline, &rec.hba1c_baseline};
        for (std::size_t i = 0; i < 3; ++i) {
            auto v = text::parse_double(f[i + 1]);
            if (!v || !std::isfinite(*v)) throw ParseError("covariate must be a finite number", lineno);
            *cov[i] = *v;
        }
        for (std::size_t i = 4; i < f.size(); ++i) {
            if (f[i].empty() || f[i] == "NA") {
                rec.outcomes.emplace_back(std::nullopt);
                continue;
            }
            auto v = text::parse_double(f[i]);
            if (!v || !std::isfinite(*v)) throw ParseError("outcome must be finite or empty", lineno);
            rec.outcomes.emplace_back(*v);
        }
        if (table.find(rec.subject_id)) throw ParseError("duplicate subject " + rec.subject_id, lineno);
        table.records.push_back(std::move(rec));
    });
    if (!header_seen) throw ParseError("empty subject file", 0);
    return table;
}

SubjectTable read_subject_csv(const std::filesystem::path& path) {
    return parse_subject_csv(read_text_file(path));
}

void write_subject_csv(std::ostream& out, const SubjectTable& table) {
    out << "subject_id,age,fpg_baseline,hba1c_baseline";
    for (const auto& n : table.outcome_names) out << ',' << n;
    out << '\n';
    for (const auto& r : table.records) {
        out << r.subject_id << ',' << text::format_exact(r.age) << ',' << text::format_exact(r.fpg_baseline)
            << ',' << text::format_exact(r.hba1c_baseline);
        for (const auto& o : r.outcomes) {
            out << ',';
            if (o) out << text::format_exact(*o);
        }
        out << '\n';
    }
}

CalibrationTable parse_calibration_csv(std::string_view text) {
    CalibrationTable table;
    bool header_seen = false;
    text::for_each_line(text, [&](std::size_t lineno, std::string_view line) {
        if (!header_seen) {
            check_header(line, {"subject_id", "date", "n_checks"}, lineno);
            header_seen = true;
            return;
        }
        auto f = text::split(line);
        if (f.size() != 3 || f[0].empty()) throw ParseError("expected 3 fields", lineno);
        std::optional<long> day = parse_iso_date(f[1]);
        if (!day || f[1].size() != 10) day = text::parse_long(f[1]);
        if (!day) throw ParseError("bad date '" + std::string(f[1]) + "'", lineno);
        auto n = text::parse_long(f[2]);
        if (!n || *n < 0) throw ParseError("n_checks must be a nonnegative integer", lineno);
        table[std::string(f[0])][*day] += static_cast<int>(*n);
    });
    if (!header_seen) throw ParseError("empty calibration file", 0);
    return table;
}

CalibrationTable read_calibration_csv(const std::filesystem::path& path) {
    return parse_calibration_csv(read_text_file(path));
}

void write_calibration_csv(std::ostream& out, const CalibrationTable& table) {
    out << "subject_id,date,n_checks\n";
    for (const auto& [id, days] : table)
        for (const auto& [day, n] : days) out << id << ',' << day << ',' << n << '\n';
}

std::size_t monitored_days(const GlucoseSeries& series) {
    const long first = series.day_of(series.times().front());
    long last = series.day_of(series.times().back());
    // a record ending exactly at midnight does not monitor the day that starts there
    const double end = series.metadata().start_wallclock + series.times().back();
    if (last > first && std::fmod(end, kMinutesPerDay) == 0.0) --last;
    return static_cast<std::size_t>(last - first + 1);
}

CalibrationLog align_calibration(const GlucoseSeries& series, const std::map<long, int>& by_day) {
    CalibrationLog log;
    const long first = series.day_of(series.times().front());
    const std::size_t ndays = monitored_days(series);
    log.daily_counts.assign(ndays, 0);
    for (std::size_t d = 0; d < ndays; ++d)
        if (auto it = by_day.find(first + static_cast<long>(d)); it != by_day.end()) log.daily_counts[d] = it->second;
    return log;
}

ValidationReport validate_series(const GlucoseSeries& series, const std::optional<CalibrationLog>& log) {
    ValidationReport report;
    if (series.span() < kMinSpanMinutes) report.violations.emplace_back("min-duration");
    if (log) {
        const std::size_t ndays = monitored_days(series);
        for (std::size_t d = 0; d < ndays; ++d) {
            const int n = d < log->daily_counts.size() ? log->daily_counts[d] : 0;
            if (n < kMinCalibrationsPerDay) report.violations.push_back("calibration-day-" + std::to_string(d + 1));
        }
    }
    report.valid = report.violations.empty();
    return report;
}

}  // namespace cgmdist
