#include <cmath>

#include "cgmdist/classic_metrics.hpp"
#include "cgmdist/errors.hpp"
#include "oracles.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cgmdist;
using cgmdist::testing::make_series;
using cgmdist::testing::sampled_series;
using cgmdist::testing::oracle_metric;
using cgmdist::testing::oracle_turning_points;
using doctest::Approx;

namespace {

GlucoseSeries shifted(const GlucoseSeries& s, double dt, double dg) {
    std::vector<double> t(s.times().begin(), s.times().end()), g(s.glucose().begin(), s.glucose().end());
    for (auto& x : t) x += dt;
    for (auto& x : g) x += dg;
    return make_series(t, g, s.nominal_interval());
}

// Two-point Gauss-Legendre per segment, exact for the linear interpolant.
double gauss_auc(const GlucoseSeries& s) {
    const double r = 1.0 / std::sqrt(3.0);
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const double t0 = s.times()[i], t1 = s.times()[i + 1], g0 = s.glucose()[i], g1 = s.glucose()[i + 1];
        for (double x : {-r, r}) {
            const double u = 0.5 * (1.0 + x);
            area += 0.5 * (t1 - t0) * (g0 + u * (g1 - g0));
        }
    }
    return area / 60.0;
}

}  // namespace

TEST_CASE("AUC") {
    CHECK(auc(sampled_series(1440.0, [](double) { return 100.0; })) == Approx(2400.0).epsilon(1e-14));
    CHECK(auc(make_series({0, 60}, {80, 120})) == Approx(100.0).epsilon(1e-14));
    CounterRng rng(4);
    std::vector<double> t, g;
    double x = 0.0;
    for (int i = 0; i < 50; ++i) {
        x += rng.uniform(1.0, 9.0);
        t.push_back(x);
        g.push_back(rng.uniform(40.0, 400.0));
    }
    const auto s = make_series(t, g);
    CHECK(std::abs(auc(s) - gauss_auc(s)) <= 1e-9 * auc(s));
    CHECK_THROWS_AS(mage(make_series({0, 5}, {90, 91})), InsufficientDataError);
}

TEST_CASE("MAGE") {
    CHECK(mage(sampled_series(2880.0, [](double) { return 120.0; })) == 0.0);
    CHECK(mage(sampled_series(2880.0, [](double t) { return 60.0 + t / 20.0; })) == 0.0);
    // square wave: 12 samples at 80, 12 at 160, ...
    const auto sq = sampled_series(24 * 5 * 10 - 5, [](double t) {
        return (static_cast<long>(t / 5.0) / 12) % 2 == 0 ? 80.0 : 160.0;
    });
    CHECK(sd_glucose(sq) < 80.0);
    CHECK(mage(sq) == 80.0);
    CHECK(mage_turning_points(sq) == oracle_turning_points(sq));
    // small ripples below one SD do not count
    const auto mixed = make_series({0, 5, 10, 15, 20, 25, 30}, {100, 101, 100, 200, 100, 101, 100});
    CHECK(mage(mixed) == Approx(100.0));
}

TEST_CASE("CONGA") {
    CHECK(conga(sampled_series(2880.0, [](double) { return 120.0; })) == 0.0);
    const auto lin = sampled_series(2880.0, [](double t) { return 60.0 + 0.1 * t; });
    CHECK(conga(lin) == Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(conga(lin, 2.0) == Approx(0.0).scale(1.0).epsilon(1e-9));
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto s = cgmdist::testing::random_series(seed, 2.0);
        CHECK(std::abs(conga(s) - oracle_metric("conga1", s)) <= 1e-9);
    }
    CHECK_THROWS_AS(conga(make_series({0, 5, 10}, {1e2, 1e2, 1e2})), InsufficientDataError);
    CHECK_THROWS_AS(conga(lin, 0.0), ConfigError);
}

TEST_CASE("MODD") {
    CHECK(modd(sampled_series(2 * 1440.0, cgmdist::testing::sinusoid)) == Approx(0.0).scale(1.0).epsilon(1e-9));
    const auto offset = sampled_series(2880.0 - 5.0, [](double t) {
        return (t < 1440.0 ? 0.0 : 10.0) + cgmdist::testing::sinusoid(std::fmod(t, 1440.0));
    });
    CHECK(modd(offset) == Approx(10.0).epsilon(1e-12));
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto s = cgmdist::testing::random_series(seed, 3.0);
        CHECK(std::abs(modd(s) - oracle_metric("modd", s)) <= 1e-9);
    }
    CHECK_THROWS_AS(modd(sampled_series(600.0, cgmdist::testing::sinusoid)), InsufficientDataError);
}

TEST_CASE("TAR") {
    CHECK(tar(sampled_series(600.0, [](double) { return 100.0; })) == 0.0);
    CHECK(tar(sampled_series(600.0, [](double) { return 180.0; })) == 1.0);
    CHECK(tar(make_series({0, 10}, {120, 160})) == Approx(0.5));
    CHECK(tar(make_series({0, 10, 20}, {160, 120, 140})) == Approx(0.25));
    const auto s = cgmdist::testing::random_series(9, 2.0);
    double previous = 1.0;
    for (double thr = 60.0; thr <= 320.0; thr += 10.0) {
        const double v = tar(s, thr);
        CHECK(v <= previous);
        CHECK(v >= 0.0);
        previous = v;
    }
}

TEST_CASE("metric panel invariances") {
    const auto s = cgmdist::testing::random_series(31, 3.0);
    const auto base = compute_metrics(s);
    const auto moved = compute_metrics(shifted(s, 1234.5, 0.0));
    CHECK(moved.mean == Approx(base.mean).epsilon(1e-12));
    CHECK(moved.auc == Approx(base.auc).epsilon(1e-12));
    CHECK(moved.mage == base.mage);
    CHECK(moved.conga1 == Approx(base.conga1).epsilon(1e-12));
    CHECK(*moved.modd == Approx(*base.modd).epsilon(1e-12));
    CHECK(moved.tar == Approx(base.tar).epsilon(1e-12));

    const double c = 7.0;
    const auto up = compute_metrics(shifted(s, 0.0, c));
    CHECK(up.mean == Approx(base.mean + c).epsilon(1e-12));
    CHECK(up.sd == Approx(base.sd).epsilon(1e-10));
    CHECK(up.auc == Approx(base.auc + c * s.span() / 60.0).epsilon(1e-12));
    CHECK(up.mage == Approx(base.mage).epsilon(1e-12));
    CHECK(up.conga1 == Approx(base.conga1).epsilon(1e-10));
    CHECK(*up.modd == Approx(*base.modd).epsilon(1e-12));

    const auto shortp = compute_metrics(sampled_series(1440.0, cgmdist::testing::sinusoid));
    CHECK_FALSE(shortp.modd.has_value());
    CHECK(compute_metrics(sampled_series(1445.0, cgmdist::testing::sinusoid)).modd.has_value());
    CHECK(base.threshold_hyper == 140.0);
}

TEST_CASE("pair matching tolerance and ties") {
    const auto s = make_series({0.0, 57.5, 62.5, 100.0}, {100, 110, 120, 130});
    // 60 minutes before t = 120 is 60: readings at 57.5 and 62.5 tie, the earlier wins
    CHECK(match_reading(s, 60.0) == std::optional<std::size_t>{1});
    CHECK(match_reading(s, 2.5) == std::optional<std::size_t>{0});
    CHECK_FALSE(match_reading(s, 30.0).has_value());
}

TEST_CASE("metrics agree with definition-level oracles") {
    for (std::uint64_t seed = 40; seed < 60; ++seed) {
        const auto s = cgmdist::testing::random_series(seed, 2.0 + 0.1 * static_cast<double>(seed - 40));
        CAPTURE(seed);
        CHECK(auc(s) == Approx(oracle_metric("auc", s)).epsilon(1e-12));
        CHECK(tar(s) == Approx(oracle_metric("tar", s)).epsilon(1e-12).scale(1.0));
        CHECK(tar(s, 180.0) == Approx(oracle_metric("tar", s, 180.0)).epsilon(1e-12).scale(1.0));
        CHECK(mage(s) == Approx(oracle_metric("mage", s)).epsilon(1e-12));
        CHECK(mage_turning_points(s) == oracle_turning_points(s));
        CHECK(conga(s) == Approx(oracle_metric("conga1", s)).epsilon(1e-12));
        CHECK(modd(s) == Approx(oracle_metric("modd", s)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(oracle_metric("lbgi", cgmdist::testing::random_series(1, 2.0)), ConfigError);
}
