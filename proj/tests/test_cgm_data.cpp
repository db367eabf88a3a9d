#include <algorithm>
#include <map>
#include <sstream>

#include "cgmdist/cgm_data.hpp"
#include "cgmdist/errors.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cgmdist;
using cgmdist::testing::make_series;

namespace {

// Reference reader: split on commas, group by id, sort numerically.
std::map<std::string, std::vector<std::pair<double, double>>> reference_parse(const std::string& text) {
    std::map<std::string, std::vector<std::pair<double, double>>> out;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto a = line.find(','), b = line.find(',', a + 1);
        out[line.substr(0, a)].emplace_back(std::stod(line.substr(a + 1, b - a - 1)), std::stod(line.substr(b + 1)));
    }
    for (auto& [id, rows] : out) {
        std::sort(rows.begin(), rows.end());
        const double t0 = rows.front().first;
        for (auto& r : rows) r.first -= t0;
    }
    return out;
}

}  // namespace

TEST_CASE("three readings of one subject parse directly") {
    const auto s = parse_cgm_csv("subject_id,timestamp,glucose_mgdl\nA,0,80\nA,5,90\nA,10,100\n");
    REQUIRE(s.size() == 1);
    CHECK(s[0].subject_id() == "A");
    CHECK(std::vector<double>(s[0].times().begin(), s[0].times().end()) == std::vector<double>{0, 5, 10});
    CHECK(std::vector<double>(s[0].glucose().begin(), s[0].glucose().end()) == std::vector<double>{80, 90, 100});
}

TEST_CASE("out-of-range glucose names the offending row") {
    try {
        parse_cgm_csv("subject_id,timestamp,glucose_mgdl\nA,0,80\nA,5,401\nA,10,100\n");
        FAIL("expected RangeError");
    } catch (const RangeError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        CHECK(std::string(e.what()).find("A") != std::string::npos);
    }
    CHECK_NOTHROW(parse_cgm_csv("subject_id,timestamp,glucose_mgdl\nA,0,40\nA,5,400\n"));
    CHECK_THROWS_AS(parse_cgm_csv("subject_id,timestamp,glucose_mgdl\nA,0,39.9\nA,5,100\n"), RangeError);
}

TEST_CASE("interleaved subjects match a reference parser") {
    const std::string text =
        "subject_id,timestamp,glucose_mgdl\n"
        "B,20,101\nA,15,95\nB,5,99\nA,0,80\nB,10,100\nA,10,90\nA,5,85\nB,15,102\n";
    const auto s = parse_cgm_csv(text);
    const auto ref = reference_parse(text);
    REQUIRE(s.size() == 2);
    CHECK(s[0].subject_id() == "B");  // order of first appearance
    for (const auto& series : s) {
        const auto& rows = ref.at(series.subject_id());
        REQUIRE(series.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(series.times()[i] == rows[i].first);
            CHECK(series.glucose()[i] == rows[i].second);
        }
    }
}

TEST_CASE("malformed rows report their line number") {
    try {
        parse_cgm_csv("subject_id,timestamp,glucose_mgdl\nA,0,80\nA,five,90\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).rfind("line 3: ", 0) == 0);
    }
    CHECK_THROWS_AS(parse_cgm_csv("subject_id,timestamp,glucose_mgdl\nA,0\n"), ParseError);
    CHECK_THROWS_AS(parse_cgm_csv("id,time,value\nA,0,80\n"), ParseError);
    CHECK_THROWS_AS(parse_cgm_csv(""), ParseError);
}

TEST_CASE("duplicate timestamps are rejected with both lines") {
    try {
        parse_cgm_csv("subject_id,timestamp,glucose_mgdl\nA,0,80\nA,5,90\nA,5,91\n");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        CHECK(what.find("3") != std::string::npos);
        CHECK(what.find("4") != std::string::npos);
    }
}

TEST_CASE("ISO timestamps normalize to minutes and keep wall-clock") {
    const auto s = parse_cgm_csv(
        "subject_id,timestamp,glucose_mgdl\n"
        "A,2024-03-01T23:55:00+01:00,100\n"
        "A,2024-03-02T00:05+01:00,110\n"
        "A,2024-03-01T23:00:30Z,120\n");
    REQUIRE(s.size() == 1);
    const auto t = s[0].times();
    REQUIRE(s[0].size() == 3);
    // 23:55+01:00 is 22:55Z: readings sort to 22:55Z, 23:00:30Z, 23:05Z
    CHECK(t[0] == 0.0);
    CHECK(t[1] == doctest::Approx(5.5));
    CHECK(t[2] == doctest::Approx(10.0));
    CHECK(s[0].glucose()[1] == 120.0);
    CHECK(s[0].glucose()[2] == 110.0);
    CHECK(s[0].metadata().wallclock_from_iso);
    // local day of the first reading differs from the day after local midnight
    CHECK(s[0].day_of(t[1]) == s[0].day_of(t[0]) + 1);
    CHECK_THROWS_AS(parse_cgm_csv("subject_id,timestamp,glucose_mgdl\nA,2024-03-01T00:00Z,100\nA,5,100\n"),
                    ParseError);
}

TEST_CASE("serialize then parse reproduces series bit for bit") {
    const auto a = cgmdist::testing::random_series(11, 2.5, true, "A");
    const auto b = cgmdist::testing::random_series(12, 3.0, true, "B");
    std::ostringstream out;
    const std::vector<GlucoseSeries> in{a, b};
    write_cgm_csv(out, in);
    const auto back = parse_cgm_csv(out.str());
    REQUIRE(back.size() == 2);
    for (std::size_t k = 0; k < 2; ++k) {
        const auto& x = in[k];
        const auto& y = back[k];
        REQUIRE(x.size() == y.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(x.times()[i] - x.times()[0] == y.times()[i]);
            CHECK(x.glucose()[i] == y.glucose()[i]);
        }
    }
}

TEST_CASE("series invariants are enforced at construction") {
    CHECK_THROWS_AS(make_series({0}, {100}), ValidationError);
    CHECK_THROWS_AS(make_series({0, 5, 5}, {100, 100, 100}), ValidationError);
    CHECK_THROWS_AS(make_series({0, 5}, {100}), ValidationError);
    CHECK_THROWS_AS(make_series({0, 5}, {100, 401}), RangeError);
    const auto s = make_series({0, 5, 10, 40, 45}, {100, 100, 100, 100, 100});
    REQUIRE(s.metadata().gaps.size() == 1);
    CHECK(s.metadata().gaps[0].after_index == 2);
    CHECK(s.metadata().gaps[0].length == 30.0);
}

TEST_CASE("validation rules") {
    auto days = [](double n) {
        return cgmdist::testing::sampled_series(n * 1440.0, [](double) { return 100.0; });
    };
    SUBCASE("six days with three checks each day is valid") {
        const auto r = validate_series(days(6), CalibrationLog{{3, 3, 3, 3, 3, 3}});
        CHECK(r.valid);
        CHECK(r.violations.empty());
    }
    SUBCASE("one day fails min-duration") {
        const auto r = validate_series(days(1));
        CHECK_FALSE(r.valid);
        CHECK(r.violations == std::vector<std::string>{"min-duration"});
    }
    SUBCASE("a day with two checks fails") {
        const auto r = validate_series(days(3), CalibrationLog{{3, 2, 3}});
        CHECK_FALSE(r.valid);
        CHECK(r.violations == std::vector<std::string>{"calibration-day-2"});
    }
    SUBCASE("just under two days") {
        CHECK_FALSE(validate_series(days(2.0 - 5.0 / 1440.0)).valid);
        CHECK(validate_series(days(2)).valid);
    }
    SUBCASE("pure and monotone in calibration checks") {
        const auto s = days(3);
        CalibrationLog log{{3, 2, 1}};
        const auto r1 = validate_series(s, log);
        const auto r2 = validate_series(s, log);
        CHECK(r1.violations == r2.violations);
        std::size_t before = r1.violations.size();
        for (int d = 0; d < 3; ++d) {
            log.daily_counts[static_cast<std::size_t>(d)] += 1;
            const auto r = validate_series(s, log);
            CHECK(r.violations.size() <= before);
            before = r.violations.size();
        }
        CHECK_FALSE(validate_series(s, log).valid);
        log.daily_counts[2] += 1;
        CHECK(validate_series(s, log).valid);
    }
}

TEST_CASE("monitored days follow local midnight") {
    CHECK(monitored_days(cgmdist::testing::sampled_series(2880.0, [](double) { return 100.0; })) == 2);
    CHECK(monitored_days(cgmdist::testing::sampled_series(2885.0, [](double) { return 100.0; })) == 3);
    SeriesMetadata meta;
    meta.start_wallclock = 1380.0;  // 23:00
    const GlucoseSeries late("L", {0.0, 120.0}, {100.0, 100.0}, 5.0, meta);
    CHECK(monitored_days(late) == 2);
    const auto log = align_calibration(late, {{0, 3}, {1, 4}, {5, 9}});
    CHECK(log.daily_counts == std::vector<int>{3, 4});
}

TEST_CASE("subject table with missing outcomes") {
    const auto t = parse_subject_csv(
        "subject_id,age,fpg_baseline,hba1c_baseline,hba1c_5y,fpg_5y\n"
        "S1,50,95,5.6,5.9,\n"
        "S2,61.5,101,6.1,NA,110\n");
    REQUIRE(t.records.size() == 2);
    CHECK(t.outcome_names == std::vector<std::string>{"hba1c_5y", "fpg_5y"});
    CHECK(t.records[0].outcomes[0] == 5.9);
    CHECK_FALSE(t.records[0].outcomes[1].has_value());
    CHECK_FALSE(t.records[1].outcomes[0].has_value());
    CHECK(t.records[1].age == 61.5);
    CHECK(t.outcome_index("fpg_5y") == 1);
    CHECK_THROWS_AS(t.outcome_index("nope"), ConfigError);
    CHECK(t.find("S2") == &t.records[1]);

    std::ostringstream out;
    write_subject_csv(out, t);
    const auto back = parse_subject_csv(out.str());
    CHECK(back.records[1].outcomes == t.records[1].outcomes);
    CHECK_THROWS_AS(parse_subject_csv("subject_id,age,fpg_baseline,hba1c_baseline\nS1,x,1,2\n"), ParseError);
}

TEST_CASE("calibration table with ISO dates and day numbers") {
    const auto c = parse_calibration_csv("subject_id,date,n_checks\nA,1970-01-02,3\nA,2,4\nB,0,1\n");
    CHECK(c.at("A").at(1) == 3);
    CHECK(c.at("A").at(2) == 4);
    CHECK(c.at("B").at(0) == 1);
    CHECK_THROWS_AS(parse_calibration_csv("subject_id,date,n_checks\nA,0,-1\n"), ParseError);
    std::ostringstream out;
    write_calibration_csv(out, c);
    CHECK(parse_calibration_csv(out.str()) == c);
}
