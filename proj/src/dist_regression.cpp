#include "cgmdist/dist_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <nlohmann/json.hpp>
#include <set>

#include "cgmdist/errors.hpp"

namespace cgmdist {

namespace {

constexpr double kRangePadding = 0.05;
constexpr double kRcondTolerance = 1e-12;
constexpr double kRidgeJitter = 1e-10;
constexpr std::size_t kLambdaGridSize = 21;
constexpr double kLambdaGridLo = -6.0;  // log10 of the relative weight
constexpr double kLambdaGridHi = 6.0;
constexpr int kCoordinateSweeps = 2;

/// Orthonormal basis of the complement of the constant vector in R^k.
Eigen::MatrixXd sum_to_zero_basis(std::size_t k) {
    const auto n = static_cast<Eigen::Index>(k);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd::Ones(n, 1));
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    return q.rightCols(n - 1);
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

std::vector<double> lambda_weight_grid() {
    std::vector<double> g(kLambdaGridSize);
    for (std::size_t i = 0; i < kLambdaGridSize; ++i)
        g[i] = std::pow(10.0, kLambdaGridLo + (kLambdaGridHi - kLambdaGridLo) * static_cast<double>(i) /
                                                  static_cast<double>(kLambdaGridSize - 1));
    return g;
}

struct BlockPenalty {
    std::size_t offset;
    Eigen::MatrixXd s;  // in constrained block coordinates
    double scale;       // tr(X_j^T X_j) / tr(S): maps relative weights to absolute lambdas
};

struct Evaluation {
    Eigen::VectorXd beta;
    Eigen::MatrixXd a_inverse;
    Eigen::VectorXd hat_diagonal_blocks;  // diag(A^{-1} X^T X)
    double rss = 0.0;
    double edf = 0.0;
    double score = std::numeric_limits<double>::infinity();
};

class PenalizedSolver {
public:
    PenalizedSolver(const Eigen::MatrixXd& x, std::span<const double> y, std::vector<BlockPenalty> penalties,
                    std::vector<std::string> block_names)
        : x_(x), y_(Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()))),
          penalties_(std::move(penalties)), block_names_(std::move(block_names)) {
        xtx_ = x_.transpose() * x_;
        xty_ = x_.transpose() * y_;
    }

    const std::vector<BlockPenalty>& penalties() const { return penalties_; }

    Evaluation evaluate(const std::vector<double>& lambdas, Criterion criterion, std::optional<double> known_scale,
                        bool keep_inverse) const {
        Eigen::MatrixXd a = xtx_;
        for (std::size_t k = 0; k < penalties_.size(); ++k) {
            const auto& pen = penalties_[k];
            const auto off = static_cast<Eigen::Index>(pen.offset);
            a.block(off, off, pen.s.rows(), pen.s.cols()) += lambdas[k] * pen.s;
        }
        const Eigen::Index p = a.rows();
        Eigen::VectorXd scaling(p);
        for (Eigen::Index i = 0; i < p; ++i) {
            // a zero column with no penalty is unidentified; jitter would only hide that
            if (!(a(i, i) > 0.0))
                throw SingularFitError("penalized system is rank deficient in " + block_of_column(i) +
                                       " (column carries no information)");
            scaling[i] = 1.0 / std::sqrt(a(i, i));
        }
        Eigen::MatrixXd scaled = scaling.asDiagonal() * a * scaling.asDiagonal();

        Eigen::LLT<Eigen::MatrixXd> llt(scaled);
        if (llt.info() != Eigen::Success || !(llt.rcond() >= kRcondTolerance)) {
            scaled.diagonal().array() += kRidgeJitter;
            llt.compute(scaled);
            if (llt.info() != Eigen::Success || !(llt.rcond() >= kRcondTolerance))
                throw SingularFitError("penalized system is rank deficient in " + deficient_block(scaled) +
                                       " (reciprocal condition below 1e-12)");
        }
        Evaluation ev;
        ev.beta = scaling.asDiagonal() * llt.solve(scaling.asDiagonal() * xty_);
        ev.rss = (y_ - x_ * ev.beta).squaredNorm();
        const Eigen::MatrixXd scaled_xtx = scaling.asDiagonal() * xtx_ * scaling.asDiagonal();
        const Eigen::MatrixXd influence = llt.solve(scaled_xtx);
        ev.hat_diagonal_blocks = influence.diagonal();
        ev.edf = influence.trace();
        if (keep_inverse)
            ev.a_inverse = scaling.asDiagonal() * llt.solve(Eigen::MatrixXd::Identity(p, p)) * scaling.asDiagonal();
        ev.score = score(ev.rss, ev.edf, criterion, known_scale);
        return ev;
    }

    double score(double rss, double edf, Criterion criterion, std::optional<double> known_scale) const {
        const double n = static_cast<double>(x_.rows());
        if (criterion == Criterion::ubre) {
            const double s2 = *known_scale;
            return rss / n - s2 + 2.0 * s2 * edf / n;
        }
        if (!(n - edf > 0.0)) return std::numeric_limits<double>::infinity();
        return n * rss / ((n - edf) * (n - edf));
    }

private:
    std::string block_of_column(Eigen::Index i) const {
        for (std::size_t k = 0; k < penalties_.size(); k += 2) {
            const auto off = static_cast<Eigen::Index>(penalties_[k].offset);
            if (i >= off && i < off + penalties_[k].s.rows()) return "channel '" + block_names_[k / 2] + "'";
        }
        return "the linear terms";
    }

    std::string deficient_block(const Eigen::MatrixXd& scaled) const {
        for (std::size_t k = 0; k < penalties_.size(); k += 2) {
            const auto off = static_cast<Eigen::Index>(penalties_[k].offset);
            const auto d = penalties_[k].s.rows();
            Eigen::LLT<Eigen::MatrixXd> sub(scaled.block(off, off, d, d));
            if (sub.info() != Eigen::Success || !(sub.rcond() >= kRcondTolerance))
                return "channel '" + block_names_[k / 2] + "'";
        }
        return penalties_.empty() ? "the linear terms" : "the combined design (collinear channels or linear terms)";
    }

    const Eigen::MatrixXd& x_;
    Eigen::Map<const Eigen::VectorXd> y_;
    std::vector<BlockPenalty> penalties_;
    std::vector<std::string> block_names_;
    Eigen::MatrixXd xtx_;
    Eigen::VectorXd xty_;
};

double adjusted_r2(double rss, double tss, double n, double edf) {
    return 1.0 - (rss / (n - edf)) / (tss / (n - 1.0));
}

FitDiagnostics make_diagnostics(double rss, std::span<const double> y, double edf, const ModelSpec& spec, double gcv) {
    FitDiagnostics d;
    d.n = y.size();
    const double n = static_cast<double>(d.n);
    if (!(n > edf + 1.0))
        throw NumericalError("diagnostics need n > edf + 1 (n = " + std::to_string(d.n) + ", edf = " + std::to_string(edf) + ")");
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    double tss = 0.0;
    for (double v : y) tss += (v - mean) * (v - mean);
    if (!(tss > 0.0)) throw NumericalError("response has zero variance; R^2 is undefined");
    d.rss = rss;
    d.tss = tss;
    d.edf = edf;
    d.r_squared = 1.0 - rss / tss;
    d.adj_r_squared = adjusted_r2(rss, tss, n, edf);
    const double sigma2 = rss / n;
    d.log_likelihood = sigma2 > 0.0 ? -0.5 * n * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0)
                                    : std::numeric_limits<double>::infinity();
    const double s2 = spec.known_scale ? *spec.known_scale : sigma2;
    d.ubre = rss / n - s2 + 2.0 * s2 * edf / n;
    d.gcv = gcv;
    d.scale = rss / (n - edf);
    return d;
}

}  // namespace

std::string_view criterion_name(Criterion c) { return c == Criterion::gcv ? "gcv" : "ubre"; }

Criterion criterion_from_name(std::string_view name) {
    if (name == "gcv" || name == "GCV") return Criterion::gcv;
    if (name == "ubre" || name == "UBRE") return Criterion::ubre;
    throw ConfigError("unknown smoothing criterion '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
    if (!channels.empty() && (k0 < 4 || l0 < 4)) throw ConfigError("k0 and l0 must be at least 4 for cubic bases");
    std::set<Channel> seen(channels.begin(), channels.end());
    if (seen.size() != channels.size()) throw ConfigError("channels must be distinct");
    std::set<std::string> names(linear_terms.begin(), linear_terms.end());
    if (names.size() != linear_terms.size()) throw ConfigError("linear terms must be distinct");
    if (criterion == Criterion::ubre && !(known_scale && *known_scale > 0.0))
        throw ConfigError("UBRE selection needs a positive known scale");
    if (fixed_lambdas) {
        if (fixed_lambdas->size() != 2 * channels.size())
            throw ConfigError("fixed_lambdas needs (lambda_u, lambda_p) for every channel");
        for (double l : *fixed_lambdas)
            if (!(l >= 0.0)) throw ConfigError("smoothing parameters must be nonnegative");
    }
}

Eigen::MatrixXd second_difference_matrix(std::size_t k) {
    if (k < 3) throw ConfigError("second differences need at least 3 coefficients");
    const auto n = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n - 2, n);
    for (Eigen::Index i = 0; i < n - 2; ++i) {
        d(i, i) = 1.0;
        d(i, i + 1) = -2.0;
        d(i, i + 2) = 1.0;
    }
    return d;
}

Eigen::MatrixXd penalty_matrix(std::size_t k0, std::size_t l0, double lambda_u, double lambda_p) {
    if (!(lambda_u >= 0.0) || !(lambda_p >= 0.0)) throw ConfigError("smoothing parameters must be nonnegative");
    const Eigen::MatrixXd du = second_difference_matrix(k0);
    const Eigen::MatrixXd dp = second_difference_matrix(l0);
    const auto ik = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k0), static_cast<Eigen::Index>(k0));
    const auto il = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(l0), static_cast<Eigen::Index>(l0));
    return lambda_u * kron(du.transpose() * du, il) + lambda_p * kron(ik, dp.transpose() * dp);
}

Eigen::VectorXd channel_design_vector(const QuantileProfile& q, const ChannelBasis& basis, std::size_t* clamped) {
    const double lo = basis.u_basis.lo(), hi = basis.u_basis.hi();
    auto u_eval = [&](double u) {
        if (u < lo || u > hi) {
            if (clamped) ++*clamped;
            u = std::clamp(u, lo, hi);
        }
        return basis.u_basis.evaluate_all(u);
    };
    auto p_eval = [&](double p) { return basis.p_basis.evaluate_all(p); };
    return riemann_design_vector(q, u_eval, p_eval, basis.u_basis.size(), basis.p_basis.size());
}

ChannelBasis make_channel_basis(Channel channel, std::span<const ChannelProfiles> profiles, std::size_t k0, std::size_t l0) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& pr : profiles) {
        const auto& q = pr.get(channel);
        if (q.values.empty()) throw ConfigError("subject lacks a " + std::string(channel_name(channel)) + " profile");
        lo = std::min(lo, q.values.front());
        hi = std::max(hi, q.values.back());
    }
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw ConfigError("no profiles to span the u range");
    double pad = kRangePadding * (hi - lo);
    if (!(pad > 0.0)) pad = std::max(1e-6, kRangePadding * std::abs(0.5 * (lo + hi)));
    ChannelBasis b{channel, BSplineBasis::uniform(lo - pad, hi + pad, k0, 3), BSplineBasis::uniform(0.0, 1.0, l0, 3),
                   kron(sum_to_zero_basis(k0), Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(l0), static_cast<Eigen::Index>(l0))),
                   Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k0 * l0))};
    return b;
}

Design build_design(const Eigen::MatrixXd& linear, std::span<const ChannelProfiles> profiles, const ModelSpec& spec) {
    spec.validate();
    const auto n = linear.rows();
    if (static_cast<std::size_t>(linear.cols()) != spec.linear_terms.size())
        throw ConfigError("linear covariate matrix has " + std::to_string(linear.cols()) + " columns, spec names " +
                          std::to_string(spec.linear_terms.size()));
    if (!spec.channels.empty() && profiles.size() != static_cast<std::size_t>(n))
        throw ConfigError("profiles and covariates disagree on the number of subjects");
    if (!linear.allFinite()) throw DomainError("linear covariates must be finite");

    Design d;
    d.linear_names = spec.linear_terms;
    const Eigen::Index width_per_channel = static_cast<Eigen::Index>((spec.k0 - 1) * spec.l0);
    const Eigen::Index q = linear.cols();
    const Eigen::Index p = 1 + q + static_cast<Eigen::Index>(spec.channels.size()) * width_per_channel;
    d.x.resize(n, p);
    d.x.col(0).setOnes();
    d.x.middleCols(1, q) = linear;

    Eigen::Index offset = 1 + q;
    for (Channel c : spec.channels) {
        const std::size_t grid = profiles.front().get(c).grid.size();
        for (const auto& pr : profiles) {
            const auto& prof = pr.get(c);
            if (prof.values.empty())
                throw ConfigError("subject lacks a " + std::string(channel_name(c)) + " profile");
            if (prof.grid.size() != grid || prof.values.size() != grid)
                throw ConfigError("mismatched quantile grid sizes in channel " + std::string(channel_name(c)));
        }
        ChannelBasis basis = make_channel_basis(c, profiles, spec.k0, spec.l0);
        Eigen::MatrixXd raw(n, static_cast<Eigen::Index>(spec.k0 * spec.l0));
        for (Eigen::Index i = 0; i < n; ++i)
            raw.row(i) = channel_design_vector(profiles[static_cast<std::size_t>(i)].get(c), basis, &d.clamped).transpose();
        basis.centering = raw.colwise().mean().transpose();
        d.x.middleCols(offset, width_per_channel) = (raw.rowwise() - basis.centering.transpose()) * basis.constraint;
        d.block_offsets.push_back(static_cast<std::size_t>(offset));
        d.channels.push_back(std::move(basis));
        offset += width_per_channel;
    }
    return d;
}

double ChannelTerm::surface(double u, double p) const {
    const auto bu = basis.u_basis.evaluate_all(std::clamp(u, basis.u_basis.lo(), basis.u_basis.hi()));
    const auto bp = basis.p_basis.evaluate_all(std::clamp(p, 0.0, 1.0));
    const std::size_t l0 = bp.size();
    double s = 0.0;
    for (std::size_t k = 0; k < bu.size(); ++k)
        for (std::size_t l = 0; l < l0; ++l) s += theta[static_cast<Eigen::Index>(k * l0 + l)] * bu[k] * bp[l];
    return s;
}

DistRegressionModel fit(const Design& design, std::span<const double> response, const ModelSpec& spec) {
    spec.validate();
    const auto n = design.x.rows();
    if (static_cast<Eigen::Index>(response.size()) != n) throw ConfigError("response length differs from design rows");
    for (double v : response)
        if (!std::isfinite(v)) throw DomainError("response must be finite");
    const auto unpenalized = static_cast<Eigen::Index>(1 + design.linear_names.size());
    if (n < unpenalized)
        throw InsufficientDataError("fewer rows than unpenalized columns (" + std::to_string(n) + " < " +
                                    std::to_string(unpenalized) + ")");
    if (design.channels.size() != spec.channels.size()) throw ConfigError("design and spec disagree on channels");

    const std::size_t k0 = spec.k0, l0 = spec.l0;
    std::vector<BlockPenalty> penalties;
    std::vector<std::string> names;
    if (!spec.channels.empty()) {
        const Eigen::MatrixXd zk = sum_to_zero_basis(k0);
        const Eigen::MatrixXd du = second_difference_matrix(k0);
        const Eigen::MatrixXd dp = second_difference_matrix(l0);
        const Eigen::MatrixXd il = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(l0), static_cast<Eigen::Index>(l0));
        const Eigen::MatrixXd ikm = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k0 - 1), static_cast<Eigen::Index>(k0 - 1));
        // Z = Z_k (x) I_l, so Z^T (D^T D (x) I) Z = (Z_k^T D^T D Z_k) (x) I and Z^T (I (x) D^T D) Z = I (x) D^T D.
        const Eigen::MatrixXd s_u = kron(zk.transpose() * du.transpose() * du * zk, il);
        const Eigen::MatrixXd s_p = kron(ikm, dp.transpose() * dp);
        for (std::size_t c = 0; c < spec.channels.size(); ++c) {
            const auto off = design.block_offsets[c];
            const auto block = design.x.middleCols(static_cast<Eigen::Index>(off), s_u.cols());
            const double tr_x = block.squaredNorm();
            for (const auto* s : {&s_u, &s_p}) {
                const double tr_s = s->trace();
                penalties.push_back({off, *s, tr_s > 0.0 && tr_x > 0.0 ? tr_x / tr_s : 1.0});
            }
            names.emplace_back(channel_name(spec.channels[c]));
        }
    }

    PenalizedSolver solver(design.x, response, penalties, names);
    std::vector<double> lambdas(penalties.size(), 0.0);

    if (spec.fixed_lambdas) {
        lambdas = *spec.fixed_lambdas;
    } else if (!penalties.empty()) {
        const auto grid = lambda_weight_grid();
        std::vector<std::size_t> idx(penalties.size(), kLambdaGridSize / 2);
        std::map<std::vector<std::size_t>, double> cache;
        auto score_at = [&](const std::vector<std::size_t>& at) {
            if (auto it = cache.find(at); it != cache.end()) return it->second;
            std::vector<double> l(at.size());
            for (std::size_t k = 0; k < at.size(); ++k) l[k] = grid[at[k]] * penalties[k].scale;
            double s = std::numeric_limits<double>::infinity();
            try {
                s = solver.evaluate(l, spec.criterion, spec.known_scale, false).score;
            } catch (const SingularFitError&) {
            }
            if (!std::isfinite(s)) s = std::numeric_limits<double>::infinity();
            cache.emplace(at, s);
            return s;
        };
        double best = score_at(idx);
        for (int sweep = 0; sweep < kCoordinateSweeps; ++sweep) {
            for (std::size_t k = 0; k < idx.size(); ++k) {
                auto trial = idx;
                for (std::size_t g = 0; g < kLambdaGridSize; ++g) {
                    trial[k] = g;
                    const double s = score_at(trial);
                    if (s < best) {
                        best = s;
                        idx[k] = g;
                    }
                }
            }
        }
        if (!std::isfinite(best)) throw NumericalError("smoothing criterion is non-finite on the whole lambda grid");
        for (std::size_t k = 0; k < idx.size(); ++k) lambdas[k] = grid[idx[k]] * penalties[k].scale;
    }

    const Evaluation ev = solver.evaluate(lambdas, spec.criterion, spec.known_scale, true);
    const double gcv = solver.score(ev.rss, ev.edf, Criterion::gcv, std::nullopt);

    DistRegressionModel model;
    model.spec = spec;
    model.spec.fixed_lambdas.reset();
    model.beta = ev.beta;
    model.diagnostics = make_diagnostics(ev.rss, response, ev.edf, spec, gcv);
    const double scale = model.diagnostics.scale;
    auto se = [&](Eigen::Index i) { return std::sqrt(std::max(0.0, scale * ev.a_inverse(i, i))); };
    model.intercept = {"(Intercept)", ev.beta[0], se(0)};
    for (std::size_t j = 0; j < design.linear_names.size(); ++j) {
        const auto i = static_cast<Eigen::Index>(1 + j);
        model.linear.push_back({design.linear_names[j], ev.beta[i], se(i)});
    }
    for (std::size_t c = 0; c < design.channels.size(); ++c) {
        ChannelTerm term{design.channels[c], {}, 0.0, 0.0, 0.0};
        const auto off = static_cast<Eigen::Index>(design.block_offsets[c]);
        const auto w = term.basis.constraint.cols();
        term.theta = term.basis.constraint * ev.beta.segment(off, w);
        term.lambda_u = lambdas[2 * c];
        term.lambda_p = lambdas[2 * c + 1];
        term.edf = ev.hat_diagonal_blocks.segment(off, w).sum();
        model.terms.push_back(std::move(term));
    }
    const Eigen::VectorXd fitted = design.x * ev.beta;
    model.fitted.assign(fitted.data(), fitted.data() + fitted.size());
    return model;
}

double penalized_objective(const Design& design, std::span<const double> response, const DistRegressionModel& model,
                           const Eigen::VectorXd& beta) {
    const Eigen::Map<const Eigen::VectorXd> y(response.data(), static_cast<Eigen::Index>(response.size()));
    double value = (y - design.x * beta).squaredNorm();
    for (std::size_t c = 0; c < design.channels.size(); ++c) {
        const auto& basis = design.channels[c];
        const auto off = static_cast<Eigen::Index>(design.block_offsets[c]);
        const Eigen::VectorXd theta = basis.constraint * beta.segment(off, basis.constraint.cols());
        const Eigen::MatrixXd p = penalty_matrix(basis.u_basis.size(), basis.p_basis.size(), model.terms[c].lambda_u,
                                                 model.terms[c].lambda_p);
        value += theta.dot(p * theta);
    }
    return value;
}

Prediction predict(const DistRegressionModel& model, const ChannelProfiles& profiles, std::span<const double> linear) {
    if (linear.size() != model.linear.size())
        throw ConfigError("expected " + std::to_string(model.linear.size()) + " linear covariates, got " +
                          std::to_string(linear.size()));
    Prediction out;
    out.value = model.intercept.estimate;
    for (std::size_t j = 0; j < linear.size(); ++j) out.value += model.linear[j].estimate * linear[j];
    for (const auto& term : model.terms) {
        const auto& q = profiles.get(term.basis.channel);
        if (q.values.empty())
            throw ConfigError("missing " + std::string(channel_name(term.basis.channel)) + " profile for prediction");
        const Eigen::VectorXd w = channel_design_vector(q, term.basis, &out.clamped);
        out.value += (w - term.basis.centering).dot(term.theta);
    }
    return out;
}

FitDiagnostics diagnostics(const DistRegressionModel& model, const Design& design, std::span<const double> response) {
    const Eigen::Map<const Eigen::VectorXd> y(response.data(), static_cast<Eigen::Index>(response.size()));
    if (design.x.cols() != model.beta.size() || design.x.rows() != y.size())
        throw ConfigError("design does not match the fitted model");
    const double rss = (y - design.x * model.beta).squaredNorm();
    const double n = static_cast<double>(y.size());
    const double edf = model.diagnostics.edf;
    const double gcv = n - edf > 0.0 ? n * rss / ((n - edf) * (n - edf)) : std::numeric_limits<double>::infinity();
    return make_diagnostics(rss, response, edf, model.spec, gcv);
}

namespace {

nlohmann::json coefficient_json(const LinearCoefficient& c) {
    return {{"name", c.name}, {"estimate", c.estimate}, {"std_error", c.std_error}};
}

LinearCoefficient coefficient_from(const nlohmann::json& j) {
    return {j.at("name").get<std::string>(), j.at("estimate").get<double>(), j.at("std_error").get<double>()};
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string model_to_json(const DistRegressionModel& model) {
    nlohmann::json j;
    j["schema_version"] = 1;
    std::vector<std::string> channels;
    for (Channel c : model.spec.channels) channels.emplace_back(channel_name(c));
    j["spec"] = {{"linear_terms", model.spec.linear_terms}, {"channels", channels}, {"k0", model.spec.k0},
                 {"l0", model.spec.l0}, {"criterion", criterion_name(model.spec.criterion)}};
    if (model.spec.known_scale) j["spec"]["known_scale"] = *model.spec.known_scale;
    j["intercept"] = coefficient_json(model.intercept);
    j["linear"] = nlohmann::json::array();
    for (const auto& c : model.linear) j["linear"].push_back(coefficient_json(c));
    j["terms"] = nlohmann::json::array();
    for (const auto& t : model.terms) {
        j["terms"].push_back({{"channel", channel_name(t.basis.channel)},
                              {"u_knots", t.basis.u_basis.knots()},
                              {"p_knots", t.basis.p_basis.knots()},
                              {"theta", to_std(t.theta)},
                              {"centering", to_std(t.basis.centering)},
                              {"lambda_u", t.lambda_u},
                              {"lambda_p", t.lambda_p},
                              {"edf", t.edf}});
    }
    const auto& d = model.diagnostics;
    j["diagnostics"] = {{"n", d.n}, {"rss", d.rss}, {"tss", d.tss}, {"r_squared", d.r_squared},
                        {"adj_r_squared", d.adj_r_squared}, {"log_likelihood", d.log_likelihood},
                        {"ubre", d.ubre}, {"gcv", d.gcv}, {"edf", d.edf}, {"scale", d.scale}};
    j["beta"] = to_std(model.beta);
    return j.dump(2);
}

DistRegressionModel model_from_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("schema_version").get<int>() != 1) throw ParseError("unsupported model schema version", 0);
        DistRegressionModel m;
        const auto& s = j.at("spec");
        m.spec.linear_terms = s.at("linear_terms").get<std::vector<std::string>>();
        for (const auto& c : s.at("channels")) m.spec.channels.push_back(channel_from_name(c.get<std::string>()));
        m.spec.k0 = s.at("k0").get<std::size_t>();
        m.spec.l0 = s.at("l0").get<std::size_t>();
        m.spec.criterion = criterion_from_name(s.at("criterion").get<std::string>());
        if (s.contains("known_scale")) m.spec.known_scale = s.at("known_scale").get<double>();
        m.intercept = coefficient_from(j.at("intercept"));
        for (const auto& c : j.at("linear")) m.linear.push_back(coefficient_from(c));
        for (const auto& t : j.at("terms")) {
            ChannelTerm term{ChannelBasis{channel_from_name(t.at("channel").get<std::string>()),
                                          BSplineBasis(t.at("u_knots").get<std::vector<double>>(), 3),
                                          BSplineBasis(t.at("p_knots").get<std::vector<double>>(), 3),
                                          Eigen::MatrixXd(), to_eigen(t.at("centering").get<std::vector<double>>())},
                             to_eigen(t.at("theta").get<std::vector<double>>()), t.at("lambda_u").get<double>(),
                             t.at("lambda_p").get<double>(), t.at("edf").get<double>()};
            term.basis.constraint =
                kron(sum_to_zero_basis(term.basis.u_basis.size()),
                     Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(term.basis.p_basis.size()),
                                               static_cast<Eigen::Index>(term.basis.p_basis.size())));
            m.terms.push_back(std::move(term));
        }
        const auto& d = j.at("diagnostics");
        m.diagnostics = {d.at("n").get<std::size_t>(), d.at("rss").get<double>(), d.at("tss").get<double>(),
                         d.at("r_squared").get<double>(), d.at("adj_r_squared").get<double>(),
                         d.at("log_likelihood").get<double>(), d.at("ubre").get<double>(), d.at("gcv").get<double>(),
                         d.at("edf").get<double>(), d.at("scale").get<double>()};
        m.beta = to_eigen(j.at("beta").get<std::vector<double>>());
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model JSON: ") + e.what(), 0);
    }
}

}  // namespace cgmdist
