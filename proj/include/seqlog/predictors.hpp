#pragma once

// Online predictors: the Bayesian mixture over a finite pool (optionally with
// smooth truncation), the continuous-prior mixture realised on a grid, the
// fixed-design NML predictor and a constant baseline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "seqlog/experts.hpp"
#include "seqlog/loss.hpp"
#include "seqlog/transcript.hpp"

namespace seqlog {

inline double smooth_truncate(double g, double alpha) { return (g + alpha) / (1.0 + 2.0 * alpha); }

inline ProbValue smooth_truncate(ProbValue g, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("truncation level must be in (0,1)");
    return ProbValue(std::clamp(smooth_truncate(g.value(), alpha), 0.0, 1.0));
}

// A finite, indexable collection of sequential experts. `evaluate` fills
// out[i] with expert i's value on the prefix.
struct ExpertPool {
    std::size_t size = 0;
    std::function<void(std::span<const Feature>, std::span<double>)> evaluate;
};

inline ExpertPool pool_from_family(ExpertFamily family) {
    auto shared = std::make_shared<const ExpertFamily>(std::move(family));
    ExpertPool pool;
    pool.size = shared->size();
    pool.evaluate = [shared](std::span<const Feature> prefix, std::span<double> out) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = shared->eval_index(i, prefix);
    };
    return pool;
}

// Static experts at the given parameter points. Values depend only on the last
// feature, so they are cached per distinct feature (up to `cache_limit`).
inline ExpertPool pool_from_points(ExpertFamily family, std::vector<std::vector<double>> points, std::size_t cache_limit = 64) {
    if (points.empty()) throw std::invalid_argument("pool_from_points: no points");
    struct State {
        ExpertFamily family;
        std::vector<std::vector<double>> points;
        std::size_t cache_limit;
        std::map<Feature, std::vector<double>> cache;
    };
    auto st = std::make_shared<State>(State{std::move(family), std::move(points), cache_limit, {}});
    ExpertPool pool;
    pool.size = st->points.size();
    pool.evaluate = [st](std::span<const Feature> prefix, std::span<double> out) {
        const Feature& x = prefix.back();
        if (auto it = st->cache.find(x); it != st->cache.end()) {
            std::copy(it->second.begin(), it->second.end(), out.begin());
            return;
        }
        const bool fast = st->family.kind() == FamilyKind::LipschitzParametric || st->family.kind() == FamilyKind::GeneralizedLinear;
        const LinkFunction* link = st->family.link();
        Features one{x};
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto& w = st->points[i];
            if (link) out[i] = std::clamp(link->map(dot(w, x)), 0.0, 1.0);
            else if (fast) out[i] = st->family.eval_unchecked(w, x);
            else out[i] = st->family.eval_params(w, one);
        }
        if (st->cache.size() < st->cache_limit) st->cache.emplace(x, std::vector<double>(out.begin(), out.end()));
    };
    return pool;
}

class OnlinePredictor {
public:
    virtual ~OnlinePredictor() = default;
    // Prediction for the last feature of `prefix`, given all earlier labels.
    virtual double predict(std::span<const Feature> prefix) = 0;
    virtual void update(Label y) = 0;
    virtual std::unique_ptr<OnlinePredictor> clone() const = 0;
    virtual std::string name() const = 0;
};

class ConstantPredictor final : public OnlinePredictor {
public:
    explicit ConstantPredictor(double p) : p_(ProbValue(p).value()) {}
    double predict(std::span<const Feature>) override { return p_; }
    void update(Label) override {}
    std::unique_ptr<OnlinePredictor> clone() const override { return std::make_unique<ConstantPredictor>(*this); }
    std::string name() const override { return "constant"; }

private:
    double p_;
};

// Bayesian mixture over a finite pool. With `alpha` set, every expert's value
// is smoothly truncated before mixing and before the weight update.
class MixturePredictor final : public OnlinePredictor {
public:
    explicit MixturePredictor(ExpertPool pool, std::optional<double> alpha = std::nullopt, std::vector<double> log_prior = {})
        : pool_(std::make_shared<const ExpertPool>(std::move(pool))), alpha_(alpha) {
        if (pool_->size == 0) throw std::invalid_argument("mixture over an empty pool");
        if (alpha_ && !(*alpha_ > 0.0 && *alpha_ < 1.0)) throw std::invalid_argument("truncation level must be in (0,1)");
        if (log_prior.empty()) {
            log_prior.assign(pool_->size, -std::log(static_cast<double>(pool_->size)));
        } else {
            if (log_prior.size() != pool_->size) throw std::invalid_argument("prior size does not match the pool");
            double z = detail::log_sum_exp(log_prior);
            if (!std::isfinite(z)) throw std::invalid_argument("prior has no mass");
            for (double& v : log_prior) v -= z;
        }
        log_prior_ = std::make_shared<const std::vector<double>>(std::move(log_prior));
        loss_weights_.assign(pool_->size, 0.0);
        values_.assign(pool_->size, 0.0);
    }

    double predict(std::span<const Feature> prefix) override {
        if (pending_) throw std::logic_error("predict called twice without an update");
        if (prefix.size() != steps_ + 1) throw std::logic_error("prefix length does not match the step counter");
        pool_->evaluate(prefix, values_);
        if (alpha_)
            for (double& v : values_) v = smooth_truncate(v, *alpha_);
        const auto& prior = *log_prior_;
        double m = kNegInf;
        for (std::size_t i = 0; i < values_.size(); ++i) m = std::max(m, prior[i] + loss_weights_[i]);
        if (m == kNegInf) throw std::runtime_error("every expert has assigned probability zero to the observed labels");
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < values_.size(); ++i) {
            double w = std::exp(prior[i] + loss_weights_[i] - m);
            num += w * values_[i];
            den += w;
        }
        pending_ = true;
        last_ = std::clamp(num / den, 0.0, 1.0);
        return last_;
    }

    void update(Label y) override {
        if (!pending_) throw std::logic_error("update called before predict");
        for (std::size_t i = 0; i < values_.size(); ++i) loss_weights_[i] -= detail::log_loss(values_[i], y.value());
        pending_ = false;
        ++steps_;
    }

    std::unique_ptr<OnlinePredictor> clone() const override { return std::make_unique<MixturePredictor>(*this); }
    std::string name() const override { return alpha_ ? "truncated_bayes" : "bayes"; }

    // Minus the cumulative (truncated, if alpha is set) log loss of each expert.
    const std::vector<double>& loss_weights() const { return loss_weights_; }
    const std::vector<double>& log_prior() const { return *log_prior_; }
    // Values (after truncation) used at the most recent prediction.
    const std::vector<double>& expert_values() const { return values_; }
    std::optional<double> alpha() const { return alpha_; }
    std::size_t steps() const { return steps_; }
    std::size_t size() const { return pool_->size; }

    // ln sum_w prior_w p_w(y^t | x^t) for the labels seen so far.
    double log_mixture_likelihood() const {
        std::vector<double> v(loss_weights_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = (*log_prior_)[i] + loss_weights_[i];
        return detail::log_sum_exp(v);
    }

private:
    std::shared_ptr<const ExpertPool> pool_;
    std::optional<double> alpha_;
    std::shared_ptr<const std::vector<double>> log_prior_;
    std::vector<double> loss_weights_;
    std::vector<double> values_;
    std::size_t steps_ = 0;
    bool pending_ = false;
    double last_ = 0.5;
};

using PredictorState = MixturePredictor;

inline ProbValue bayes_step(PredictorState& state, std::span<const Feature> prefix) { return ProbValue(state.predict(prefix)); }

inline PredictorState& bayes_update(PredictorState& state, Label y) {
    state.update(y);
    return state;
}

// ---------------------------------------------------------------------------
// Fixed-design game values

// V_t(prefix) = ln of the summed leaf sups below the prefix. levels[t] holds
// the 2^t prefixes of length t, bit j of the index being label j+1.
struct GameValueTable {
    std::size_t horizon = 0;
    std::vector<std::vector<double>> levels;

    double root() const { return levels.front().front(); }
    double value(std::uint64_t prefix, std::size_t length) const { return levels.at(length).at(prefix); }

    // Q(y_{t+1} = 1 | prefix); 1/2 at zero-mass prefixes.
    double conditional_one(std::uint64_t prefix, std::size_t length) const {
        double v = value(prefix, length);
        if (v == kNegInf) return 0.5;
        return std::clamp(std::exp(value(prefix | (std::uint64_t{1} << length), length + 1) - v), 0.0, 1.0);
    }
};

inline constexpr std::size_t kEnumerationCap = 22;

// Builds the table from ln sup_h p_h(y^T|x^T) at every leaf by pairwise
// log-sum-exp.
inline GameValueTable game_table_from_leaves(std::vector<double> leaves, std::size_t horizon) {
    if (horizon > kEnumerationCap + 4) throw std::invalid_argument("game table horizon too large");
    if (leaves.size() != (std::size_t{1} << horizon)) throw std::invalid_argument("leaf count must be 2^T");
    GameValueTable table;
    table.horizon = horizon;
    table.levels.resize(horizon + 1);
    table.levels[horizon] = std::move(leaves);
    for (std::size_t t = horizon; t-- > 0;) {
        auto& up = table.levels[t];
        const auto& down = table.levels[t + 1];
        up.resize(std::size_t{1} << t);
        const std::uint64_t bit = std::uint64_t{1} << t;
        for (std::uint64_t m = 0; m < up.size(); ++m) up[m] = detail::log_add(down[m], down[m | bit]);
    }
    return table;
}

class NmlPredictor final : public OnlinePredictor {
public:
    explicit NmlPredictor(std::shared_ptr<const GameValueTable> table) : table_(std::move(table)) {}
    const GameValueTable& table() const { return *table_; }

    double predict(std::span<const Feature> prefix) override {
        if (prefix.size() != t_ + 1) throw std::logic_error("prefix length does not match the step counter");
        if (t_ >= table_->horizon) throw std::out_of_range("NML predictor queried beyond its horizon");
        return table_->conditional_one(mask_, t_);
    }
    void update(Label y) override {
        if (y.value()) mask_ |= std::uint64_t{1} << t_;
        ++t_;
    }
    std::unique_ptr<OnlinePredictor> clone() const override { return std::make_unique<NmlPredictor>(*this); }
    std::string name() const override { return "nml"; }

private:
    std::shared_ptr<const GameValueTable> table_;
    std::uint64_t mask_ = 0;
    std::size_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Continuous-prior mixture on a grid

struct ContinuousBayesOptions {
    std::size_t horizon = 0;
    // Hessian bound of the per-step log-likelihood; estimated when absent.
    std::optional<double> hessian_bound;
    // Per-axis resolution override; the default is ceil(10 sqrt(CT/d) R*).
    std::optional<std::size_t> resolution;
    // Features used by the Hessian estimator when no bound is supplied.
    Features probe_features;
    std::uint64_t seed = 1;
    std::size_t max_points = 5'000'000;
};

struct ContinuousBayesInfo {
    double hessian_bound = 0.0;
    double enlarged_radius = 0.0;
    std::size_t resolution = 0;
    double spacing = 0.0;
    std::size_t grid_points = 0;
};

// Largest |u^T H u| of w -> ln f(w,x)^y (1-f(w,x))^(1-y) over random w in the
// ball, random unit u, the supplied features and both labels; central
// differences with step `eps`.
inline double estimate_log_hessian_bound(const ExpertFamily& family, const Features& xs, std::size_t samples, std::uint64_t seed,
                                         double eps = 1e-4) {
    const ParamBall& ball = family.ball();
    const std::size_t d = ball.dimension;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto random_direction = [&]() {
        std::vector<double> u(d);
        double n = 0.0;
        do {
            for (double& v : u) v = gauss(rng);
            n = lp_norm(u, 2.0);
        } while (n == 0.0);
        for (double& v : u) v /= n;
        return u;
    };
    auto value = [&](const std::vector<double>& w, const Feature& x, int y) {
        return detail::log_likelihood(family.eval_unchecked(w, x), y);
    };
    double best = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        auto dir = random_direction();
        double r = ball.radius * std::pow(unif(rng), 1.0 / static_cast<double>(d));
        std::vector<double> w(d);
        for (std::size_t j = 0; j < d; ++j) w[j] = r * dir[j];
        auto u = random_direction();
        std::vector<double> wp(w), wm(w);
        for (std::size_t j = 0; j < d; ++j) {
            wp[j] += eps * u[j];
            wm[j] -= eps * u[j];
        }
        for (const auto& x : xs)
            for (int y : {0, 1}) {
                double h = (value(wp, x, y) - 2.0 * value(w, x, y) + value(wm, x, y)) / (eps * eps);
                if (std::isfinite(h)) best = std::max(best, std::abs(h));
            }
    }
    return best;
}

// Rejects a claimed bound the empirical Hessian exceeds by more than 1%.
inline void verify_hessian_bound(const ExpertFamily& family, double claimed, const Features& xs, std::uint64_t seed,
                                 std::size_t samples = 2000) {
    double empirical = estimate_log_hessian_bound(family, xs, samples, seed);
    if (empirical > 1.01 * claimed)
        throw std::invalid_argument("Hessian bound " + format_double(claimed) + " is exceeded by the empirical value " +
                                    format_double(empirical));
}

// Grid points j*h, j in [-res, res]^d, inside B_2^d(radius).
inline std::vector<std::vector<double>> l2_ball_grid(std::size_t d, double radius, std::size_t res, std::size_t max_points) {
    const double h = radius / static_cast<double>(res);
    const long J = static_cast<long>(res);
    std::vector<std::vector<double>> pts;
    std::vector<long> idx(d, -J);
    std::vector<double> w(d);
    while (true) {
        double n2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            w[j] = h * static_cast<double>(idx[j]);
            n2 += w[j] * w[j];
        }
        if (std::sqrt(n2) <= radius * (1.0 + 1e-12)) {
            pts.push_back(w);
            if (pts.size() > max_points) throw std::invalid_argument("grid exceeds " + std::to_string(max_points) + " points");
        }
        std::size_t j = 0;
        while (j < d && ++idx[j] > J) idx[j++] = -J;
        if (j == d) break;
    }
    return pts;
}

inline std::pair<MixturePredictor, ContinuousBayesInfo> continuous_bayes(const ExpertFamily& family, const ContinuousBayesOptions& opts) {
    if (family.kind() != FamilyKind::LipschitzParametric && family.kind() != FamilyKind::GeneralizedLinear)
        throw std::invalid_argument("continuous_bayes needs a parametric family");
    const ParamBall& ball = family.ball();
    const std::size_t d = ball.dimension;
    if (d > 4) throw std::invalid_argument("continuous_bayes: dimension above 4 is outside the grid guard");
    if (ball.norm_order != 2.0) throw std::invalid_argument("continuous_bayes: parameter ball must be l2");
    if (opts.horizon == 0) throw std::invalid_argument("continuous_bayes: horizon must be positive");

    ContinuousBayesInfo info;
    if (opts.hessian_bound) {
        info.hessian_bound = *opts.hessian_bound;
        if (!opts.probe_features.empty()) verify_hessian_bound(family, info.hessian_bound, opts.probe_features, opts.seed);
    } else {
        if (opts.probe_features.empty()) throw std::invalid_argument("continuous_bayes: supply a Hessian bound or probe features");
        info.hessian_bound = estimate_log_hessian_bound(family, opts.probe_features, 2000, opts.seed);
    }
    if (!(info.hessian_bound > 0)) throw std::invalid_argument("continuous_bayes: Hessian bound must be positive");

    const double CT = info.hessian_bound * static_cast<double>(opts.horizon);
    const double half_radius = std::sqrt(static_cast<double>(d) / CT);
    info.enlarged_radius = ball.radius + half_radius;
    info.resolution = opts.resolution ? *opts.resolution
                                      : static_cast<std::size_t>(std::ceil(10.0 * std::sqrt(CT / static_cast<double>(d)) * info.enlarged_radius));
    if (info.resolution == 0) throw std::invalid_argument("continuous_bayes: resolution must be positive");
    info.spacing = info.enlarged_radius / static_cast<double>(info.resolution);
    auto points = l2_ball_grid(d, info.enlarged_radius, info.resolution, opts.max_points);
    info.grid_points = points.size();
    return {MixturePredictor(pool_from_points(family, std::move(points))), info};
}

// ---------------------------------------------------------------------------

// Runs the online protocol with a fixed label sequence.
inline Transcript run_online(OnlinePredictor& predictor, const Features& xs, std::span<const Label> ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("run_online: length mismatch");
    Transcript tr;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        double p = predictor.predict(std::span<const Feature>(xs).first(t + 1));
        predictor.update(ys[t]);
        tr.record(xs[t], p, ys[t]);
    }
    return tr;
}

}  // namespace seqlog
