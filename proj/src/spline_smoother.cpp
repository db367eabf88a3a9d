#include "cgmdist/spline_smoother.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "cgmdist/banded.hpp"
#include "cgmdist/errors.hpp"

namespace cgmdist {

namespace {

constexpr double kMinutesPerDay = 1440.0;
constexpr std::size_t kWeightGridSize = 41;

// 4-point Gauss-Legendre on [-1, 1]; exact for the degree <= 7 integrands of cubic or
// quintic second-derivative products.
constexpr std::array<double, 4> kGaussNodes = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                               0.8611363115940526};
constexpr std::array<double, 4> kGaussWeights = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                                 0.3478548451374538};

SymmetricBandMatrix roughness_gram(const BSplineBasis& basis) {
    const std::size_t p = static_cast<std::size_t>(basis.degree());
    SymmetricBandMatrix omega(basis.size(), p);
    std::vector<double> block(p + 1);
    const auto& knots = basis.knots();
    for (std::size_t mu = p; mu + 1 < knots.size() - p; ++mu) {
        const double a = knots[mu], b = knots[mu + 1];
        if (!(b > a)) continue;
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
            const double x = mid + half * kGaussNodes[q];
            const std::size_t first = basis.evaluate(x, 2, block);
            const double w = half * kGaussWeights[q];
            for (std::size_t i = 0; i <= p; ++i)
                for (std::size_t j = 0; j <= i; ++j) omega(first + i, first + j) += w * block[i] * block[j];
        }
    }
    return omega;
}

struct Candidate {
    std::vector<double> coefficients;
    double edf = 0.0;
    double rss = 0.0;
    double gcv = std::numeric_limits<double>::infinity();
};

}  // namespace

SmoothedTrajectory::SmoothedTrajectory(BSplineBasis basis, std::vector<double> coefficients, double lambda,
                                       double edf, double gcv)
    : basis_(std::move(basis)), coefficients_(std::move(coefficients)), lambda_(lambda), edf_(edf), gcv_(gcv) {
    if (coefficients_.size() != basis_.size())
        throw ConfigError("coefficient count must equal the number of basis functions");
}

double SmoothedTrajectory::eval(double t, int deriv) const {
    if (!(t >= domain_lo() && t <= domain_hi()))
        throw DomainError("time " + std::to_string(t) + " outside spline domain [" + std::to_string(domain_lo()) +
                          ", " + std::to_string(domain_hi()) + "]");
    if (deriv < 0) throw DomainError("negative derivative order");
    std::array<double, 8> block{};
    const std::size_t first = basis_.evaluate(t, deriv, block);
    double s = 0.0;
    for (int j = 0; j <= degree(); ++j) s += block[static_cast<std::size_t>(j)] * coefficients_[first + static_cast<std::size_t>(j)];
    return s;
}

std::vector<double> smoothing_weight_grid() {
    std::vector<double> grid(kWeightGridSize);
    for (std::size_t i = 0; i < kWeightGridSize; ++i)
        grid[i] = std::pow(10.0, -6.0 + 12.0 * static_cast<double>(i) / static_cast<double>(kWeightGridSize - 1));
    return grid;
}

SmoothedTrajectory fit_spline(std::span<const double> times, std::span<const double> values,
                              const SmootherOptions& options) {
    if (times.size() != values.size()) throw ConfigError("times and values differ in length");
    if (times.size() < 2) throw InsufficientDataError("spline fit needs at least two observations");
    if (!(options.knots_per_day >= 4.0)) throw ConfigError("knots_per_day must be at least 4");
    if (options.degree < 1) throw ConfigError("spline degree must be at least 1");
    if (options.lambda && !(*options.lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw ConfigError("times must be strictly increasing");

    const double lo = times.front(), hi = times.back();
    const auto intervals = static_cast<std::size_t>(
        std::max(1.0, std::ceil((hi - lo) / kMinutesPerDay * options.knots_per_day - 1e-9)));
    auto basis = BSplineBasis::uniform(lo, hi, intervals + static_cast<std::size_t>(options.degree), options.degree);
    const std::size_t r = basis.size(), p = static_cast<std::size_t>(options.degree);
    const std::size_t n = times.size();

    // Normal equations; each observation touches degree + 1 adjacent basis functions.
    SymmetricBandMatrix btb(r, p);
    std::vector<double> bty(r, 0.0);
    std::vector<std::size_t> firsts(n);
    std::vector<double> blocks(n * (p + 1));
    for (std::size_t j = 0; j < n; ++j) {
        std::span<double> blk(blocks.data() + j * (p + 1), p + 1);
        firsts[j] = basis.evaluate(times[j], 0, blk);
        for (std::size_t a = 0; a <= p; ++a) {
            bty[firsts[j] + a] += blk[a] * values[j];
            for (std::size_t b = 0; b <= a; ++b) btb(firsts[j] + a, firsts[j] + b) += blk[a] * blk[b];
        }
    }
    const SymmetricBandMatrix omega = options.degree >= 2 ? roughness_gram(basis) : SymmetricBandMatrix(r, p);

    auto solve_for = [&](double lambda) {
        SymmetricBandMatrix a = btb;
        a.add_scaled(omega, lambda);
        BandedLDLT ldlt(a);
        Candidate c;
        c.coefficients = ldlt.solve(bty);
        for (std::size_t j = 0; j < n; ++j) {
            double fit = 0.0;
            for (std::size_t k = 0; k <= p; ++k) fit += blocks[j * (p + 1) + k] * c.coefficients[firsts[j] + k];
            c.rss += (values[j] - fit) * (values[j] - fit);
        }
        c.edf = trace_of_product(ldlt.band_of_inverse(), btb);
        const double dn = static_cast<double>(n);
        c.gcv = dn > c.edf ? dn * c.rss / ((dn - c.edf) * (dn - c.edf)) : std::numeric_limits<double>::infinity();
        return c;
    };

    if (options.lambda) {
        try {
            auto c = solve_for(*options.lambda);
            return SmoothedTrajectory(std::move(basis), std::move(c.coefficients), *options.lambda, c.edf, c.gcv);
        } catch (const SingularFitError& e) {
            throw SingularFitError("spline fit is singular (" + std::to_string(n) + " observations, " +
                                   std::to_string(r) + " basis functions): " + e.what());
        }
    }

    double tr_btb = 0.0, tr_omega = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        tr_btb += btb(i, i);
        tr_omega += omega(i, i);
    }
    const double scale = tr_omega > 0.0 ? tr_btb / tr_omega : 1.0;
    Candidate best;
    double best_lambda = 0.0;
    for (double w : smoothing_weight_grid()) {
        const double lambda = w * scale;
        try {
            auto c = solve_for(lambda);
            if (c.gcv < best.gcv) {
                best = std::move(c);
                best_lambda = lambda;
            }
        } catch (const SingularFitError&) {
        }
    }
    if (!std::isfinite(best.gcv)) throw NumericalError("GCV is non-finite on every smoothing weight");
    return SmoothedTrajectory(std::move(basis), std::move(best.coefficients), best_lambda, best.edf, best.gcv);
}

SmoothedTrajectory fit_spline(const GlucoseSeries& series, const SmootherOptions& options) {
    return fit_spline(series.times(), series.glucose(), options);
}

std::vector<double> eval_series(const SmoothedTrajectory& traj, std::span<const double> times, int deriv) {
    std::vector<double> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out[i] = traj.eval(times[i], deriv);
    return out;
}

DerivativeSeries derivative_series(const SmoothedTrajectory& traj, std::span<const double> times) {
    return {eval_series(traj, times, 1), eval_series(traj, times, 2)};
}

std::string trajectory_to_json(const SmoothedTrajectory& traj) {
    nlohmann::json j;
    j["degree"] = traj.degree();
    j["knots"] = traj.basis().knots();
    j["coefficients"] = traj.coefficients();
    j["lambda"] = traj.lambda();
    j["edf"] = traj.edf();
    j["gcv"] = traj.gcv();
    j["domain"] = {traj.domain_lo(), traj.domain_hi()};
    return j.dump();
}

SmoothedTrajectory trajectory_from_json(std::string_view text) {
    try {
        auto j = nlohmann::json::parse(text);
        BSplineBasis basis(j.at("knots").get<std::vector<double>>(), j.at("degree").get<int>());
        return SmoothedTrajectory(std::move(basis), j.at("coefficients").get<std::vector<double>>(),
                                  j.at("lambda").get<double>(), j.value("edf", 0.0), j.value("gcv", 0.0));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("trajectory JSON: ") + e.what(), 0);
    }
}

}  // namespace cgmdist
