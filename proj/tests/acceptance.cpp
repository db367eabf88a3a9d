// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero on
// any failure.
#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cgmdist/classic_metrics.hpp"
#include "cgmdist/dist_regression.hpp"
#include "cgmdist/glucodensity.hpp"
#include "cgmdist/model_ladder.hpp"
#include "cgmdist/rng.hpp"
#include "cgmdist/spline_smoother.hpp"
#include "cgmdist/synth.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace cgmdist;
using namespace cgmdist::testing;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail << "first failure: " << what << "; ";
        pass = pass && ok;
    }
};

double gauss(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

void metric_oracles(Outcome& out) {
    double worst = 0.0;
    std::size_t mage_sets = 0;
    CounterRng pick(101);
    for (std::uint64_t k = 0; k < 100; ++k) {
        const double days = pick.uniform(2.0, 6.0);
        const auto s = random_series(CounterRng::derive(101, k), days);
        const std::string tag = " (series " + std::to_string(k) + ")";
        for (const char* name : {"auc", "conga1", "modd", "tar"}) {
            double mine = 0.0;
            const std::string n = name;
            if (n == "auc") mine = auc(s);
            if (n == "conga1") mine = conga(s);
            if (n == "modd") mine = modd(s);
            if (n == "tar") mine = tar(s);
            const double gap = std::abs(mine - oracle_metric(name, s));
            // AUC is in mg/dL*h (tens of thousands); compare it relative to its size
            const double scaled = n == "auc" ? gap / std::max(1.0, std::abs(mine)) : gap;
            worst = std::max(worst, scaled);
            out.require(scaled <= 1e-9, n + tag);
        }
        const bool same = mage_turning_points(s) == oracle_turning_points(s);
        mage_sets += same;
        out.require(same, "MAGE turning points" + tag);
        out.require(mage(s) == oracle_metric("mage", s), "MAGE value" + tag);
    }
    out.detail << "100 series, worst gap " << worst << ", identical MAGE turning points " << mage_sets << "/100";
}

void quantile_oracle(Outcome& out) {
    std::size_t points = 0;
    for (std::uint64_t k = 0; k < 50; ++k) {
        CounterRng rng(CounterRng::derive(202, k));
        const auto n = static_cast<std::size_t>(rng.uniform(1.0, 2000.0));
        std::vector<double> v(n);
        // every third set carries heavy ties
        for (auto& x : v) x = k % 3 == 0 ? std::round(rng.uniform(40.0, 60.0)) : rng.normal(130.0, 40.0);
        const auto q = quantile_profile(v);
        for (std::size_t g = 0; g < q.grid.size(); ++g) {
            const bool same = q.values[g] == inf_quantile_oracle(v, q.grid[g]);
            points += same;
            out.require(same, "set " + std::to_string(k) + " grid point " + std::to_string(g));
        }
    }
    out.detail << points << "/5000 grid values identical";
}

void kde_checks(Outcome& out) {
    // univariate mass on a spread of fixtures
    std::vector<std::vector<double>> fixtures;
    CounterRng rng(303);
    for (std::size_t n : {5u, 50u, 500u, 5000u}) {
        std::vector<double> normal(n), bimodal(n), tied(n);
        for (std::size_t i = 0; i < n; ++i) {
            normal[i] = rng.normal(120.0, 25.0);
            bimodal[i] = rng.uniform() < 0.3 ? rng.normal(70.0, 5.0) : rng.normal(180.0, 20.0);
            tied[i] = std::round(rng.uniform(95.0, 105.0));
        }
        fixtures.push_back(normal);
        fixtures.push_back(bimodal);
        fixtures.push_back(tied);
    }
    const auto syn = [] {
        auto sc = preset_scenario("default");
        sc.n_subjects = 4;
        sc.days = 2.0;
        return generate_cohort(sc);
    }();
    for (const auto& s : syn.series) {
        const auto samples = channel_samples(s, fit_spline(s));
        fixtures.push_back(samples.glucose);
        fixtures.push_back(samples.speed);
        fixtures.push_back(samples.acceleration);
    }
    double worst_mass = 0.0;
    for (std::size_t f = 0; f < fixtures.size(); ++f) {
        const double gap = std::abs(kde_univariate(fixtures[f]).mass() - 1.0);
        worst_mass = std::max(worst_mass, gap);
        out.require(gap <= 1e-3, "univariate mass, fixture " + std::to_string(f));
    }

    // Bivariate with diagonal H. For one observation the estimate is exactly the product of the
    // two univariate estimates. For n observations it is the mean of those per-observation
    // products; the product of the two n-point univariate estimates is a different function.
    double worst_sep = 0.0, literal_gap = 0.0;
    for (std::size_t n : {1u, 1u, 1u, 2u, 40u, 300u}) {
        Eigen::MatrixXd p(static_cast<Eigen::Index>(n), 2);
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            p(i, 0) = rng.normal(130.0, 30.0);
            p(i, 1) = rng.normal(0.0, 0.6);
        }
        const double h1 = rng.uniform(3.0, 12.0), h2 = rng.uniform(0.05, 0.3);
        Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
        h(0, 0) = h1 * h1;
        h(1, 1) = h2 * h2;
        std::vector<double> ax, ay;
        const double x0 = p.col(0).minCoeff() - 4 * h1, x1 = p.col(0).maxCoeff() + 4 * h1;
        const double y0 = p.col(1).minCoeff() - 4 * h2, y1 = p.col(1).maxCoeff() + 4 * h2;
        for (int i = 0; i < 64; ++i) {
            ax.push_back(x0 + (x1 - x0) * i / 63.0);
            ay.push_back(y0 + (y1 - y0) * i / 63.0);
        }
        const auto biv = kde_multivariate(p, Eigen::MatrixXd(h), {ax, ay});
        std::vector<double> expected(ax.size() * ay.size(), 0.0);
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            const auto fx = kde_univariate_on_grid(std::vector<double>{p(i, 0)}, h1, ax);
            const auto fy = kde_univariate_on_grid(std::vector<double>{p(i, 1)}, h2, ay);
            for (std::size_t a = 0; a < ax.size(); ++a)
                for (std::size_t b = 0; b < ay.size(); ++b)
                    expected[a * ay.size() + b] += fx.density[a] * fy.density[b] / static_cast<double>(n);
        }
        std::vector<double> xs(p.col(0).data(), p.col(0).data() + n), ys(p.col(1).data(), p.col(1).data() + n);
        const auto mx = kde_univariate_on_grid(xs, h1, ax), my = kde_univariate_on_grid(ys, h2, ay);
        for (std::size_t a = 0; a < ax.size(); ++a)
            for (std::size_t b = 0; b < ay.size(); ++b) {
                const double got = biv.density[a * ay.size() + b];
                const double gap = std::abs(got - expected[a * ay.size() + b]);
                worst_sep = std::max(worst_sep, gap);
                out.require(gap <= 1e-9, "bivariate separability, n = " + std::to_string(n));
                // independent cross-check straight from the kernel formula
                double direct = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    direct += gauss((ax[a] - xs[i]) / h1) / h1 * gauss((ay[b] - ys[i]) / h2) / h2;
                out.require(std::abs(got - direct / static_cast<double>(n)) <= 1e-9, "bivariate kernel sum");
                if (n > 1) literal_gap = std::max(literal_gap, std::abs(got - mx.density[a] * my.density[b]));
            }
    }
    out.detail << fixtures.size() << " univariate fixtures, worst mass error " << worst_mass
               << "; bivariate vs per-observation univariate products, worst gap " << worst_sep
               << " (product of n-point marginals differs by up to " << literal_gap << ")";
}

void derivative_checks(Outcome& out) {
    const double w = 2.0 * std::numbers::pi / 1440.0;
    const double span = 3 * 1440.0;
    const auto series = sampled_series(span, sinusoid);
    const auto s = fit_spline(series);
    const auto d = derivative_series(s, series.times());
    double e1 = 0, n1 = 0, e2 = 0, n2 = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double t = series.times()[i];
        if (t < 120.0 || t > span - 120.0) continue;
        const double v = 30.0 * w * std::cos(w * t), a = -30.0 * w * w * std::sin(w * t);
        e1 += (d.speed[i] - v) * (d.speed[i] - v);
        n1 += v * v;
        e2 += (d.acceleration[i] - a) * (d.acceleration[i] - a);
        n2 += a * a;
    }
    const double rs = std::sqrt(e1 / n1), ra = std::sqrt(e2 / n2);
    out.require(rs < 0.02, "speed RMS");
    out.require(ra < 0.02, "acceleration RMS");
    CounterRng rng(404);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const double x = rng.uniform(1.0, span - 1.0);
        const double h = 1e-3;
        const double fd = (s.eval(x + h) - s.eval(x - h)) / (2 * h);
        const double rel = std::abs(s.eval(x, 1) - fd) / std::max(std::abs(fd), 1e-12);
        worst = std::max(worst, rel);
        out.require(rel <= 1e-4, "finite difference at t = " + std::to_string(x));
    }
    out.detail << "relative RMS speed " << rs << ", acceleration " << ra << "; worst finite-difference gap " << worst;
}

void regression_reductions(Outcome& out) {
    auto sc = preset_scenario("glucose_age");
    sc.n_subjects = 120;
    sc.days = 2.0;
    const auto c = generate_cohort(sc);
    const auto cohort = assemble_cohort(c.series, c.subjects);
    const auto n = static_cast<Eigen::Index>(cohort.table.records.size());

    // covariates only, no penalty: closed-form OLS via the normal equations
    Eigen::MatrixXd lin(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = cohort.table.records[static_cast<std::size_t>(i)];
        lin.row(i) << r.age, r.fpg_baseline, r.hba1c_baseline;
        y[i] = *r.outcomes[0];
    }
    ModelSpec spec;
    spec.linear_terms = {"age", "fpg_baseline", "hba1c_baseline"};
    const auto m = fit(build_design(lin, {}, spec), std::vector<double>(y.data(), y.data() + n), spec);
    Eigen::MatrixXd x(n, 4);
    x << Eigen::VectorXd::Ones(n), lin;
    const Eigen::VectorXd ols = (x.transpose() * x).inverse() * (x.transpose() * y);
    double worst_ols = std::abs(m.intercept.estimate - ols[0]) / std::max(1.0, std::abs(ols[0]));
    for (std::size_t j = 0; j < 3; ++j)
        worst_ols = std::max(worst_ols, std::abs(m.linear[j].estimate - ols[static_cast<Eigen::Index>(j + 1)]) /
                                            std::max(1.0, std::abs(ols[static_cast<Eigen::Index>(j + 1)])));
    out.require(worst_ols <= 1e-8, "OLS reduction");

    // an absolute floor of -1e-10 sits at the eigensolver's roundoff (eps * |P|) once lambda passes
    // about 1e5, so sample the range the fitter works in
    double min_eig = 1e300;
    CounterRng rng(505);
    for (std::size_t k : {4u, 6u, 8u, 12u})
        for (int rep = 0; rep < 5; ++rep) {
            const auto p = penalty_matrix(k, k + 1, std::pow(10.0, rng.uniform(-3, 3)), std::pow(10.0, rng.uniform(-3, 3)));
            const double e = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p).eigenvalues().minCoeff();
            min_eig = std::min(min_eig, e);
            out.require(e >= -1e-10, "penalty eigenvalue");
        }

    // W against a naive triple loop using the library basis objects only for B-spline values
    double worst_w = 0.0;
    for (Channel ch : {Channel::glucose, Channel::speed, Channel::acceleration}) {
        std::vector<ChannelProfiles> profs;
        for (const auto& f : cohort.features) profs.push_back(f.profiles);
        const auto basis = make_channel_basis(ch, profs, 8, 8);
        for (std::size_t i = 0; i < 10; ++i) {
            const auto& q = profs[i].get(ch);
            const auto w = channel_design_vector(q, basis);
            for (std::size_t k = 0; k < 8; ++k)
                for (std::size_t l = 0; l < 8; ++l) {
                    double sum = 0.0;
                    for (std::size_t g = 0; g < q.grid.size(); ++g) {
                        const double u = std::clamp(q.values[g], basis.u_basis.lo(), basis.u_basis.hi());
                        sum += basis.u_basis.evaluate_all(u)[k] * basis.p_basis.evaluate_all(q.grid[g])[l] /
                               static_cast<double>(q.grid.size() + 1);
                    }
                    const double gap = std::abs(w[static_cast<Eigen::Index>(k * 8 + l)] - sum);
                    worst_w = std::max(worst_w, gap);
                    out.require(gap <= 1e-12, "W entry");
                }
        }
    }
    out.detail << "OLS gap " << worst_ols << ", smallest penalty eigenvalue " << min_eig << ", worst W gap " << worst_w;
}

double r2_against(const std::vector<double>& fitted, const std::vector<double>& truth) {
    double mean = 0.0;
    for (double v : truth) mean += v;
    mean /= static_cast<double>(truth.size());
    double ss = 0.0, st = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss += (fitted[i] - truth[i]) * (fitted[i] - truth[i]);
        st += (truth[i] - mean) * (truth[i] - mean);
    }
    return 1.0 - ss / st;
}

void signal_recovery(Outcome& out) {
    const auto sc = preset_scenario("glucose_age");
    const auto c = generate_cohort(sc);
    const auto cohort = assemble_cohort(c.series, c.subjects);
    const auto fit = fit_outcome(cohort, c.subjects.outcome_names[0], ladder_spec(3));
    std::vector<double> truth;
    for (std::size_t r : fit.rows) truth.push_back(c.signal[0][r]);
    const double r2 = r2_against(fit.model.fitted, truth);
    out.require(r2 >= 0.99, "R2 against truth");
    out.detail << "n = " << fit.rows.size() << ", noise sd " << sc.outcomes[0].noise_sd << ", R2 against truth " << r2;
}

void ladder_replicates(Outcome& out) {
    const std::size_t reps = 50;
    std::size_t monotone = 0;
    std::vector<double> gain;
    for (std::size_t r = 0; r < reps; ++r) {
        auto sc = preset_scenario("ladder");
        sc.seed = CounterRng::derive(7, r);
        const auto c = generate_cohort(sc);
        const auto cohort = assemble_cohort(c.series, c.subjects);
        const auto table = run_model_ladder(cohort, c.subjects.outcome_names);
        const auto& o = c.subjects.outcome_names[0];
        const double a2 = table.at(o, 2).diagnostics.adj_r_squared, a3 = table.at(o, 3).diagnostics.adj_r_squared,
                     a4 = table.at(o, 4).diagnostics.adj_r_squared, a5 = table.at(o, 5).diagnostics.adj_r_squared;
        monotone += a3 <= a4 && a4 <= a5;
        gain.push_back(a5 - a2);
    }
    std::sort(gain.begin(), gain.end());
    const double median = 0.5 * (gain[reps / 2 - 1] + gain[reps / 2]);
    out.require(static_cast<double>(monotone) >= 0.9 * static_cast<double>(reps), "monotone share");
    out.require(median >= 0.10, "median gain");
    out.detail << "monotone 3->4->5 in " << monotone << "/" << reps << ", median adjR2(5) - adjR2(2) = " << median;
}

void null_control(Outcome& out) {
    const auto sc = preset_scenario("null");
    const auto c = generate_cohort(sc);
    const auto cohort = assemble_cohort(c.series, c.subjects);
    const auto table = run_model_ladder(cohort, c.subjects.outcome_names);
    double lo = 1e300, hi = -1e300;
    for (const auto& e : table.entries) {
        const double a = e.diagnostics.adj_r_squared;
        lo = std::min(lo, a);
        hi = std::max(hi, a);
        out.require(a >= -0.05 && a <= 0.05, e.outcome + " model " + std::to_string(e.model));
    }
    out.detail << "n = " << cohort.table.records.size() << ", " << table.entries.size()
               << " fits, adjusted R2 in [" << lo << ", " << hi << "]";
}

}  // namespace

int main() {
    struct Item {
        int id;
        const char* title;
        std::function<void(Outcome&)> run;
        double budget_seconds;  // 0: no runtime bound
    };
    const std::vector<Item> items = {
        {1, "metric oracle equivalence", metric_oracles, 10.0},
        {2, "quantile correctness", quantile_oracle, 1.0},
        {3, "KDE normalization and separability", kde_checks, 0.0},
        {4, "derivative fidelity", derivative_checks, 0.0},
        {5, "regression reductions", regression_reductions, 0.0},
        {6, "signal recovery", signal_recovery, 60.0},
        {7, "ladder qualitative reproduction", ladder_replicates, 600.0},
        {8, "null control", null_control, 0.0},
    };
    int failures = 0;
    for (const auto& item : items) {
        Outcome out;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            item.run(out);
        } catch (const std::exception& e) {
            out.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (item.budget_seconds > 0.0) out.require(secs < item.budget_seconds, "runtime budget");
        failures += !out.pass;
        std::printf("%s %d %s: %s [%.2f s]\n", out.pass ? "PASS" : "FAIL", item.id, item.title, out.detail.str().c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
