#pragma once

// Closed-form regret bounds (nats) and the cover-scale tuning infimum.

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqlog/covering.hpp"
#include "seqlog/shtarkov.hpp"
#include "seqlog/loss.hpp"
#include "seqlog/transcript.hpp"

namespace seqlog {

enum class BoundKind {
    CoverUpper,           // 2 alpha T + ln|G_alpha|
    LipschitzUpper,       // d ln(2RLT/d + 1) + 2d, optionally capped at T
    LipschitzLower,       // d ln(RLT/d) - d ln 64 - d ln ln(RLT)
    HessianUpper,         // (d/2) ln(2CR^2 T/d + 2) + d/2 + ln 2
    HessianVolumeUpper,   // ln Vol(W*)/Vol(B(sqrt(d/CT))) + d/2 + ln 2
    LinkLower,            // (d/2) ln(T/d^{(s+2)/s}) - c d
    DsLower,              // ((s+1)/(s e)) T^{s/(s+1)}
    CoverSize,            // ln sum_{t<=dfat} C(T,t) ceil(3/(2 alpha))^t
};

inline const std::vector<std::pair<BoundKind, std::string>>& bound_kind_names() {
    static const std::vector<std::pair<BoundKind, std::string>> names = {
        {BoundKind::CoverUpper, "cover"},           {BoundKind::LipschitzUpper, "lipschitz"},
        {BoundKind::LipschitzLower, "lipschitz_lower"}, {BoundKind::HessianUpper, "hessian"},
        {BoundKind::HessianVolumeUpper, "hessian_volume"}, {BoundKind::LinkLower, "link_lower"},
        {BoundKind::DsLower, "ds_lower"},           {BoundKind::CoverSize, "cover_size"},
    };
    return names;
}

inline std::string to_string(BoundKind k) {
    for (const auto& [kind, name] : bound_kind_names())
        if (kind == k) return name;
    return "?";
}

inline BoundKind parse_bound_kind(const std::string& name) {
    for (const auto& [kind, n] : bound_kind_names())
        if (n == name) return kind;
    throw std::invalid_argument("unknown bound kind '" + name + "'");
}

struct BoundSpec {
    BoundKind kind = BoundKind::CoverUpper;
    std::map<std::string, double> params;

    BoundSpec& set(const std::string& key, double v) {
        params[key] = v;
        return *this;
    }
    bool has(const std::string& key) const { return params.count(key) > 0; }
    double get(const std::string& key) const {
        auto it = params.find(key);
        if (it == params.end()) throw std::invalid_argument("bound '" + to_string(kind) + "' needs parameter '" + key + "'");
        return it->second;
    }
    double get_or(const std::string& key, double fallback) const { return has(key) ? get(key) : fallback; }
};

namespace detail {

inline double positive(const BoundSpec& spec, const std::string& key) {
    double v = spec.get(key);
    if (!(v > 0)) throw std::invalid_argument("bound '" + to_string(spec.kind) + "': " + key + " must be positive");
    return v;
}

// ln of the volume of the unit l2 ball in R^k.
inline double log_unit_ball_volume(double k) { return 0.5 * k * std::log(std::numbers::pi) - std::lgamma(0.5 * k + 1.0); }

// ln Vol(cube of side a, enlarged by an l2 ball of radius rho), by the Steiner
// formula sum_k C(d,k) a^{d-k} omega_k rho^k.
inline double log_box_enlarged_volume(double d, double side, double rho) {
    std::vector<double> terms;
    for (int k = 0; k <= static_cast<int>(d); ++k)
        terms.push_back(log_binomial(d, k) + (d - k) * std::log(side) + log_unit_ball_volume(k) + k * std::log(rho));
    return log_sum_exp(terms);
}

}  // namespace detail

// Parameters by kind:
//   cover:           T, alpha, and cover_size or log_cover_size
//   lipschitz:       T, d, R, L, optional cap (nonzero applies min{., T})
//   lipschitz_lower: T, d, R, L
//   hessian:         T, d, R, C
//   hessian_volume:  T, d, C, and one of R (l2 ball), box_side (cube), volume_ratio
//   link_lower:      T, d, s (inf allowed), optional c (default 0)
//   ds_lower:        T (>= 0), s
//   cover_size:      T, alpha, dfat
inline double evaluate_bound(const BoundSpec& spec) {
    using detail::positive;
    switch (spec.kind) {
        case BoundKind::CoverUpper: {
            double T = positive(spec, "T"), a = spec.get("alpha");
            if (!(a > 0 && a < 1)) throw std::invalid_argument("bound 'cover': alpha must be in (0,1)");
            double log_size = spec.has("log_cover_size") ? spec.get("log_cover_size") : std::log(positive(spec, "cover_size"));
            if (log_size < 0) throw std::invalid_argument("bound 'cover': cover size must be at least 1");
            return 2.0 * a * T + log_size;
        }
        case BoundKind::LipschitzUpper: {
            double T = positive(spec, "T"), d = positive(spec, "d"), R = positive(spec, "R"), L = positive(spec, "L");
            bool cap = spec.get_or("cap", 0.0) != 0.0;
            if (!cap && T < d) throw std::invalid_argument("bound 'lipschitz': requires T >= d (or cap=1)");
            double v = d * std::log(2.0 * R * L * T / d + 1.0) + 2.0 * d;
            return cap ? std::min(v, T) : v;
        }
        case BoundKind::LipschitzLower: {
            double T = positive(spec, "T"), d = positive(spec, "d"), R = positive(spec, "R"), L = positive(spec, "L");
            if (!(R * L * T > 1.0)) throw std::invalid_argument("bound 'lipschitz_lower': requires RLT > 1");
            return hard_lipschitz_formula(d, R, L, T);
        }
        case BoundKind::HessianUpper: {
            double T = positive(spec, "T"), d = positive(spec, "d"), R = positive(spec, "R"), C = positive(spec, "C");
            return 0.5 * d * std::log(2.0 * C * R * R * T / d + 2.0) + 0.5 * d + std::log(2.0);
        }
        case BoundKind::HessianVolumeUpper: {
            double T = positive(spec, "T"), d = positive(spec, "d"), C = positive(spec, "C");
            double rho = std::sqrt(d / (C * T));
            double log_ratio;
            if (spec.has("volume_ratio")) {
                log_ratio = std::log(positive(spec, "volume_ratio"));
            } else if (spec.has("box_side")) {
                double a = positive(spec, "box_side");
                log_ratio = detail::log_box_enlarged_volume(d, a, rho) - detail::log_unit_ball_volume(d) - d * std::log(rho);
            } else {
                double R = positive(spec, "R");
                log_ratio = d * std::log((R + rho) / rho);
            }
            return log_ratio + 0.5 * d + std::log(2.0);
        }
        case BoundKind::LinkLower: {
            double T = positive(spec, "T"), d = positive(spec, "d"), s = positive(spec, "s");
            return block_leading_term(d, T, s) - spec.get_or("c", 0.0) * d;
        }
        case BoundKind::DsLower: {
            double T = spec.get("T"), s = positive(spec, "s");
            if (T < 0) throw std::invalid_argument("bound 'ds_lower': T must be nonnegative");
            if (s < 1) throw std::invalid_argument("bound 'ds_lower': s must be >= 1");
            return ds_formula(T, s);
        }
        case BoundKind::CoverSize: {
            double T = positive(spec, "T"), a = spec.get("alpha"), dfat = spec.get("dfat");
            if (!(a > 0)) throw std::invalid_argument("bound 'cover_size': alpha must be positive");
            if (dfat < -1 || dfat != std::floor(dfat)) throw std::invalid_argument("bound 'cover_size': dfat must be an integer >= -1");
            return log_cover_size_bound(T, a, static_cast<int>(dfat));
        }
    }
    throw std::logic_error("unhandled bound kind");
}

// ---------------------------------------------------------------------------

struct AlphaTuning {
    double alpha = 0.0;
    double value = 0.0;
    bool monotone = true;  // log cover size nonincreasing along the grid
};

inline std::vector<double> log_spaced_grid(double lo, double hi, std::size_t points, bool include_hi = false) {
    if (!(lo > 0 && hi > lo) || points < 2) throw std::invalid_argument("log_spaced_grid: need 0 < lo < hi and >= 2 points");
    std::vector<double> g(points);
    double denom = static_cast<double>(include_hi ? points - 1 : points);
    double step = std::log(hi / lo) / denom;
    for (std::size_t i = 0; i < points; ++i) g[i] = lo * std::exp(step * static_cast<double>(i));
    return g;
}

// Grid minimiser of 2 alpha T + ln|G_alpha|; `log_cover_size` returns ln|G_alpha|.
// The default grid is 200 log-spaced points in [1e-6, 1).
inline AlphaTuning tune_alpha(double T, const std::function<double(double)>& log_cover_size, std::vector<double> grid = {}) {
    if (grid.empty()) grid = log_spaced_grid(1e-6, 1.0, 200);
    AlphaTuning best{0.0, kInf, true};
    double prev = kInf;
    for (double a : grid) {
        double ls = log_cover_size(a);
        if (ls > prev + 1e-12) best.monotone = false;
        prev = ls;
        double v = 2.0 * a * T + ls;
        if (v < best.value) {
            best.value = v;
            best.alpha = a;
        }
    }
    return best;
}

}  // namespace seqlog
