#pragma once

// Hypothesis families. A family is either finite (experts addressed by index)
// or parametric (experts addressed by a parameter vector in a ball). Every
// expert is evaluated on a feature prefix x^t; static experts only look at
// the last feature.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "seqlog/loss.hpp"
#include "seqlog/transcript.hpp"

namespace seqlog {

using SequentialFn = std::function<double(std::span<const Feature>)>;
using ParamFn = std::function<double(std::span<const double>, const Feature&)>;

enum class FamilyKind { FiniteStatic, FiniteSequential, LipschitzParametric, GeneralizedLinear, DsFamily, HardLipschitz };

inline const char* to_string(FamilyKind k) {
    switch (k) {
        case FamilyKind::FiniteStatic: return "finite_static";
        case FamilyKind::FiniteSequential: return "finite_sequential";
        case FamilyKind::LipschitzParametric: return "lipschitz";
        case FamilyKind::GeneralizedLinear: return "generalized_linear";
        case FamilyKind::DsFamily: return "ds";
        case FamilyKind::HardLipschitz: return "hard_lipschitz";
    }
    return "?";
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double lp_norm(std::span<const double> w, double order) {
    if (std::isinf(order)) {
        double m = 0.0;
        for (double v : w) m = std::max(m, std::abs(v));
        return m;
    }
    if (order == 2.0) {
        double s = 0.0;
        for (double v : w) s += v * v;
        return std::sqrt(s);
    }
    double s = 0.0;
    for (double v : w) s += std::pow(std::abs(v), order);
    return std::pow(s, 1.0 / order);
}

inline double lp_distance(std::span<const double> a, std::span<const double> b, double order) {
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    return lp_norm(diff, order);
}

// B_s^d(R): the radius-R ball of R^d under the l_s norm, s in [1, inf].
struct ParamBall {
    std::size_t dimension = 1;
    double radius = 1.0;
    double norm_order = 2.0;

    static constexpr double kSlack = 1e-12;

    double norm(std::span<const double> w) const { return lp_norm(w, norm_order); }
    bool contains(std::span<const double> w) const {
        return w.size() == dimension && norm(w) <= radius + kSlack;
    }
};

// Map from the real line to [0,1], with the interval-containment constants
// (c1, c2) used by the block-design lower bound.
struct LinkFunction {
    std::string name;
    std::function<double(double)> map;
    double c1 = 0.5;
    double c2 = 0.0;

    double operator()(double z) const { return map(z); }

    static LinkFunction logistic() {
        return {"logistic",
                [](double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); },
                0.5, 0.2};
    }

    // Piecewise-linear interpolation through (xs[i], ys[i]), clamped at the ends.
    static LinkFunction tabulated(std::string name, std::vector<double> xs, std::vector<double> ys, double c1, double c2) {
        if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("tabulated link needs >= 2 matching points");
        if (!std::is_sorted(xs.begin(), xs.end())) throw std::invalid_argument("tabulated link abscissae must be sorted");
        for (double y : ys)
            if (y < 0.0 || y > 1.0) throw std::invalid_argument("tabulated link values must lie in [0,1]");
        auto fn = [xs = std::move(xs), ys = std::move(ys)](double z) {
            if (z <= xs.front()) return ys.front();
            if (z >= xs.back()) return ys.back();
            auto it = std::upper_bound(xs.begin(), xs.end(), z);
            std::size_t hi = static_cast<std::size_t>(it - xs.begin());
            std::size_t lo = hi - 1;
            double t = (z - xs[lo]) / (xs[hi] - xs[lo]);
            return ys[lo] + t * (ys[hi] - ys[lo]);
        };
        return {std::move(name), std::move(fn), c1, c2};
    }

    // Checks [c1 - c2 u, c1 + c2 u] is inside f([-u, u]) with u = d^{-r}.
    // The grid minimum over-estimates the true minimum (and the grid maximum
    // under-estimates the true maximum), so a pass here is sound.
    bool contains_interval(double d, double r, std::size_t grid = 4001) const {
        double u = std::pow(d, -r);
        double lo = c1 - c2 * u, hi = c1 + c2 * u;
        double mn = kInf, mx = kNegInf;
        for (std::size_t i = 0; i < grid; ++i) {
            double z = -u + 2.0 * u * static_cast<double>(i) / static_cast<double>(grid - 1);
            double v = map(z);
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        return mn <= lo && mx >= hi;
    }
};

// M binary code vectors of length T with their minimum pairwise distance.
struct CodeBook {
    std::vector<std::vector<std::uint8_t>> vectors;
    std::size_t min_distance = 0;

    std::size_t length() const { return vectors.empty() ? 0 : vectors.front().size(); }

    static std::size_t hamming(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
        std::size_t d = 0;
        for (std::size_t t = 0; t < a.size(); ++t) d += a[t] != b[t];
        return d;
    }

    std::size_t compute_min_distance() const {
        std::size_t best = length();
        for (std::size_t i = 0; i < vectors.size(); ++i)
            for (std::size_t j = i + 1; j < vectors.size(); ++j) best = std::min(best, hamming(vectors[i], vectors[j]));
        return best;
    }

    // Every pair differs in at least T/4 coordinates.
    bool verify() const { return 4 * compute_min_distance() >= length(); }
};

namespace detail {

struct FiniteStaticData {
    std::vector<std::vector<double>> table;  // [expert][domain point]
};

struct FiniteSequentialData {
    std::vector<SequentialFn> members;
};

struct ParametricData {
    ParamBall ball;
    double lipschitz = 1.0;
    ParamFn fn;
    std::optional<LinkFunction> link;
};

struct DsData {
    std::size_t horizon = 0;
    double s = 1.0;
};

struct HardLipschitzData {
    ParamBall ball;
    double lipschitz = 1.0;
    double alpha = 0.0;
    Features designated;
    std::map<Feature, std::size_t> designated_index;
    std::vector<std::vector<double>> packing;  // [member][coordinate]
    std::vector<std::vector<double>> table;    // [member][t], values in {0, alpha}
};

inline std::size_t domain_index(const Feature& x, std::size_t domain) {
    if (x.size() != 1) throw std::invalid_argument("finite-domain feature must have one coordinate");
    double v = x[0];
    if (v < 0 || v != std::floor(v) || v >= static_cast<double>(domain))
        throw std::invalid_argument("feature index " + format_double(v) + " outside domain of size " + std::to_string(domain));
    return static_cast<std::size_t>(v);
}

}  // namespace detail

class ExpertFamily {
public:
    static ExpertFamily finite_static(std::vector<std::vector<double>> table) {
        if (table.empty()) throw std::invalid_argument("finite family must be nonempty");
        auto width = table.front().size();
        for (auto& row : table) {
            if (row.size() != width || width == 0) throw std::invalid_argument("finite family rows must share a nonzero width");
            for (double v : row)
                if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("expert value outside [0,1]");
        }
        ExpertFamily f(FamilyKind::FiniteStatic, 1);
        f.data_ = detail::FiniteStaticData{std::move(table)};
        return f;
    }

    // Constant experts h == p for each p in `values`.
    static ExpertFamily constants(const std::vector<double>& values) {
        std::vector<std::vector<double>> table;
        for (double v : values) table.push_back({v});
        return finite_static(std::move(table));
    }

    static ExpertFamily finite_sequential(std::vector<SequentialFn> members) {
        if (members.empty()) throw std::invalid_argument("finite family must be nonempty");
        ExpertFamily f(FamilyKind::FiniteSequential, 1);
        f.data_ = detail::FiniteSequentialData{std::move(members)};
        return f;
    }

    static ExpertFamily lipschitz(ParamBall ball, double lipschitz_constant, ParamFn fn) {
        if (!(lipschitz_constant > 0)) throw std::invalid_argument("Lipschitz constant must be positive");
        ExpertFamily f(FamilyKind::LipschitzParametric, ball.dimension);
        f.data_ = detail::ParametricData{ball, lipschitz_constant, std::move(fn), std::nullopt};
        return f;
    }

    // f(<w, x>) with w in `ball`; `lipschitz_constant` bounds |f(w1,x)-f(w2,x)| / ||w1-w2||_s.
    static ExpertFamily generalized_linear(ParamBall ball, LinkFunction link, double lipschitz_constant) {
        auto map = link.map;
        ParamFn fn = [map](std::span<const double> w, const Feature& x) { return map(dot(w, x)); };
        ExpertFamily f(FamilyKind::GeneralizedLinear, ball.dimension);
        f.data_ = detail::ParametricData{ball, lipschitz_constant, std::move(fn), std::move(link)};
        return f;
    }

    // Logistic regression over B_s^d(R); L = max||x||_{dual} / 4 is a valid Lipschitz constant.
    static ExpertFamily logistic(std::size_t d, double radius, double lipschitz_constant, double norm_order = 2.0) {
        return generalized_linear(ParamBall{d, radius, norm_order}, LinkFunction::logistic(), lipschitz_constant);
    }

    // p in [0,1] as the constant Bernoulli expert, parametrised by w in [-1,1] via p = (w+1)/2.
    static ExpertFamily constant_bernoulli() {
        return lipschitz(ParamBall{1, 1.0, 2.0}, 0.5,
                         [](std::span<const double> w, const Feature&) { return std::clamp((w[0] + 1.0) / 2.0, 0.0, 1.0); });
    }

    static ExpertFamily ds_family(std::size_t horizon, double s) {
        if (horizon == 0 || !(s >= 1.0)) throw std::invalid_argument("D_s family needs horizon >= 1 and s >= 1");
        ExpertFamily f(FamilyKind::DsFamily, horizon);
        f.data_ = detail::DsData{horizon, s};
        return f;
    }

    static ExpertFamily hard_lipschitz(detail::HardLipschitzData data) {
        ExpertFamily f(FamilyKind::HardLipschitz, data.ball.dimension);
        for (std::size_t t = 0; t < data.designated.size(); ++t) data.designated_index[data.designated[t]] = t;
        f.data_ = std::move(data);
        return f;
    }

    FamilyKind kind() const { return kind_; }
    std::size_t dimension() const { return dimension_; }

    bool is_finite() const { return kind_ == FamilyKind::FiniteStatic || kind_ == FamilyKind::FiniteSequential; }
    bool is_parametric() const {
        return kind_ == FamilyKind::LipschitzParametric || kind_ == FamilyKind::GeneralizedLinear || kind_ == FamilyKind::HardLipschitz;
    }

    // Number of indexable experts (packing points for HardLipschitz).
    std::size_t size() const {
        if (auto* s = std::get_if<detail::FiniteStaticData>(&data_)) return s->table.size();
        if (auto* q = std::get_if<detail::FiniteSequentialData>(&data_)) return q->members.size();
        if (auto* h = std::get_if<detail::HardLipschitzData>(&data_)) return h->packing.size();
        throw std::logic_error(std::string("family kind ") + to_string(kind_) + " has no finite index");
    }

    // Domain size of a FiniteStatic family (1 for constant experts).
    std::size_t domain_size() const { return std::get<detail::FiniteStaticData>(data_).table.front().size(); }
    const std::vector<std::vector<double>>& table() const { return std::get<detail::FiniteStaticData>(data_).table; }

    const ParamBall& ball() const {
        if (auto* p = std::get_if<detail::ParametricData>(&data_)) return p->ball;
        if (auto* h = std::get_if<detail::HardLipschitzData>(&data_)) return h->ball;
        throw std::logic_error("family has no parameter ball");
    }
    double lipschitz_constant() const {
        if (auto* p = std::get_if<detail::ParametricData>(&data_)) return p->lipschitz;
        if (auto* h = std::get_if<detail::HardLipschitzData>(&data_)) return h->lipschitz;
        throw std::logic_error("family has no Lipschitz constant");
    }
    const LinkFunction* link() const {
        if (auto* p = std::get_if<detail::ParametricData>(&data_)) return p->link ? &*p->link : nullptr;
        return nullptr;
    }
    const detail::DsData& ds() const { return std::get<detail::DsData>(data_); }
    const detail::HardLipschitzData& hard() const { return std::get<detail::HardLipschitzData>(data_); }

    // Evaluation by finite index.
    double eval_index(std::size_t i, std::span<const Feature> prefix) const {
        if (prefix.empty()) throw std::invalid_argument("expert evaluation needs a nonempty prefix");
        if (auto* s = std::get_if<detail::FiniteStaticData>(&data_)) {
            const auto& row = s->table.at(i);
            if (row.size() == 1) return row[0];
            return row[detail::domain_index(prefix.back(), row.size())];
        }
        if (auto* q = std::get_if<detail::FiniteSequentialData>(&data_)) {
            double v = q->members.at(i)(prefix);
            if (!(v >= 0.0 && v <= 1.0)) throw std::runtime_error("sequential expert returned a value outside [0,1]");
            return v;
        }
        if (auto* h = std::get_if<detail::HardLipschitzData>(&data_)) return eval_params(h->packing.at(i), prefix);
        throw std::logic_error(std::string("family kind ") + to_string(kind_) + " has no finite index");
    }

    // Evaluation by parameter vector; finite kinds take {index}.
    double eval_params(std::span<const double> params, std::span<const Feature> prefix) const {
        if (prefix.empty()) throw std::invalid_argument("expert evaluation needs a nonempty prefix");
        if (is_finite()) {
            if (params.size() != 1 || params[0] < 0 || params[0] != std::floor(params[0]) || params[0] >= static_cast<double>(size()))
                throw std::invalid_argument("finite family parameter must be a valid expert index");
            return eval_index(static_cast<std::size_t>(params[0]), prefix);
        }
        if (auto* p = std::get_if<detail::ParametricData>(&data_)) {
            if (!p->ball.contains(params)) throw std::invalid_argument("parameters outside the parameter ball");
            if (prefix.back().size() != p->ball.dimension) throw std::invalid_argument("feature dimension mismatch");
            return std::clamp(p->fn(params, prefix.back()), 0.0, 1.0);
        }
        if (auto* ds = std::get_if<detail::DsData>(&data_)) {
            check_ds_member(params, *ds);
            const Feature& x = prefix.back();
            if (x.size() == 1) {
                double t = x[0];
                if (t < 1 || t != std::floor(t) || t > static_cast<double>(ds->horizon))
                    throw std::invalid_argument("D_s index feature must be in 1..T");
                return params[static_cast<std::size_t>(t) - 1];
            }
            return std::min(1.0, std::abs(dot(params, x)));
        }
        const auto& h = std::get<detail::HardLipschitzData>(data_);
        if (!h.ball.contains(params)) throw std::invalid_argument("parameters outside the parameter ball");
        auto it = h.designated_index.find(prefix.back());
        if (it == h.designated_index.end()) return 0.0;
        std::size_t t = it->second;
        // McShane extension of the table from the packing points.
        double best = 0.0;
        for (std::size_t j = 0; j < h.packing.size(); ++j)
            best = std::max(best, h.table[j][t] - h.lipschitz * lp_distance(params, h.packing[j], 2.0));
        return std::min(best, 1.0);
    }

    // Raw parametric function, no ball check; used by pools that evaluate cover points.
    double eval_unchecked(std::span<const double> w, const Feature& x) const {
        const auto& p = std::get<detail::ParametricData>(data_);
        return std::clamp(p.fn(w, x), 0.0, 1.0);
    }

    static void check_ds_member(std::span<const double> p, const detail::DsData& ds) {
        if (p.size() != ds.horizon) throw std::invalid_argument("D_s member must have length T");
        double total = 0.0;
        for (double v : p) {
            if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("D_s member entries must be in [0,1]");
            total += std::pow(v, ds.s);
        }
        if (total > 1.0 + 1e-12) throw std::invalid_argument("D_s member violates sum p_t^s <= 1");
    }

private:
    ExpertFamily(FamilyKind kind, std::size_t dim) : kind_(kind), dimension_(dim) {}

    FamilyKind kind_;
    std::size_t dimension_;
    std::variant<detail::FiniteStaticData, detail::FiniteSequentialData, detail::ParametricData, detail::DsData,
                 detail::HardLipschitzData>
        data_;
};

inline ProbValue eval_expert(const ExpertFamily& family, std::span<const double> params, std::span<const Feature> prefix) {
    return ProbValue(family.eval_params(params, prefix));
}

// ---------------------------------------------------------------------------
// Best expert in hindsight

struct HindsightOptions {
    // Grid points per axis; 0 selects the default (1001 for d <= 2, 101 for d <= 4).
    std::size_t grid_per_axis = 0;
    double refine_tolerance = 1e-10;
};

namespace detail {

// Cumulative log loss of a static parametric expert over (feature, label) pairs
// grouped with multiplicities.
struct GroupedSample {
    std::vector<Feature> xs;
    std::vector<std::array<double, 2>> counts;  // counts[i][y]
};

inline GroupedSample group_samples(std::span<const Feature> xs, std::span<const Label> ys) {
    std::map<Feature, std::size_t> index;
    GroupedSample g;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        auto [it, fresh] = index.emplace(xs[t], g.xs.size());
        if (fresh) {
            g.xs.push_back(xs[t]);
            g.counts.push_back({0.0, 0.0});
        }
        g.counts[it->second][static_cast<std::size_t>(ys[t].value())] += 1.0;
    }
    return g;
}

template <class F>
double grouped_loss(const GroupedSample& g, F&& value_at) {
    double total = 0.0;
    for (std::size_t i = 0; i < g.xs.size(); ++i) {
        double p = value_at(g.xs[i]);
        if (g.counts[i][1] > 0) total += g.counts[i][1] * log_loss(p, 1);
        if (g.counts[i][0] > 0) total += g.counts[i][0] * log_loss(p, 0);
    }
    return total;
}

// Coordinate p_i maximising a ln p + b ln(1-p) - lambda p^s on [0,1].
inline double ds_coordinate(double a, double b, double lambda, double s) {
    if (a <= 0.0) return 0.0;
    double hi = b > 0.0 ? a / (a + b) : 1.0;
    if (lambda <= 0.0) return hi;
    auto grad = [&](double p) { return a / p - (b > 0.0 ? b / (1.0 - p) : 0.0) - lambda * s * std::pow(p, s - 1.0); };
    if (grad(hi) >= 0.0) return hi;
    double lo = 0.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= 0.0) break;
        (grad(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

inline std::size_t default_grid_per_axis(std::size_t d) {
    if (d <= 2) return 1001;
    if (d <= 4) return 101;
    throw std::invalid_argument("best_in_hindsight: no default grid for d > 4; supply grid_per_axis");
}

// Exact for finite families and D_s; grid search plus coordinate refinement for
// parametric families (the returned loss upper-bounds the true infimum).
inline HindsightRecord best_in_hindsight(const ExpertFamily& family, std::span<const Feature> xs, std::span<const Label> ys,
                                         HindsightOptions opts = {}) {
    if (xs.size() != ys.size()) throw std::invalid_argument("best_in_hindsight: length mismatch");
    const std::size_t T = xs.size();

    if (family.is_finite()) {
        HindsightRecord best{{0.0}, kInf};
        for (std::size_t i = 0; i < family.size(); ++i) {
            double loss = 0.0;
            for (std::size_t t = 0; t < T && loss < best.loss; ++t)
                loss += detail::log_loss(family.eval_index(i, xs.first(t + 1)), ys[t].value());
            if (loss < best.loss || (i == 0 && best.loss == kInf)) best = {{static_cast<double>(i)}, loss};
        }
        if (T == 0) best.loss = 0.0;
        return best;
    }

    if (family.kind() == FamilyKind::DsFamily) {
        const auto& ds = family.ds();
        std::vector<double> a(ds.horizon, 0.0), b(ds.horizon, 0.0);
        for (std::size_t t = 0; t < T; ++t) {
            const Feature& x = xs[t];
            std::size_t idx = 0;
            if (x.size() == 1) {
                idx = static_cast<std::size_t>(x[0]) - 1;
            } else {
                auto nz = std::count_if(x.begin(), x.end(), [](double v) { return v != 0.0; });
                auto it = std::find_if(x.begin(), x.end(), [](double v) { return v != 0.0; });
                if (nz != 1 || *it != 1.0) throw std::invalid_argument("D_s hindsight needs index or basis-vector features");
                idx = static_cast<std::size_t>(it - x.begin());
            }
            if (idx >= ds.horizon) throw std::invalid_argument("D_s feature index out of range");
            (ys[t].value() ? a : b)[idx] += 1.0;
        }
        auto solve = [&](double lambda) {
            std::vector<double> p(ds.horizon);
            for (std::size_t i = 0; i < ds.horizon; ++i) p[i] = detail::ds_coordinate(a[i], b[i], lambda, ds.s);
            return p;
        };
        auto budget = [&](const std::vector<double>& p) {
            double s = 0.0;
            for (double v : p) s += std::pow(v, ds.s);
            return s;
        };
        std::vector<double> p = solve(0.0);
        if (budget(p) > 1.0) {
            double lo = 0.0, hi = 1.0;
            while (budget(solve(hi)) > 1.0) hi *= 2.0;
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (lo + hi);
                (budget(solve(mid)) > 1.0 ? lo : hi) = mid;
            }
            p = solve(hi);
        }
        double loss = 0.0;
        for (std::size_t i = 0; i < ds.horizon; ++i) {
            if (a[i] > 0) loss += a[i] * detail::log_loss(p[i], 1);
            if (b[i] > 0) loss += b[i] * detail::log_loss(p[i], 0);
        }
        return {p, loss};
    }

    const ParamBall& ball = family.ball();
    const std::size_t d = ball.dimension;
    if (T == 0) return {std::vector<double>(d, 0.0), 0.0};

    auto grouped = detail::group_samples(xs, ys);
    Features one(1);
    auto loss_at = [&](std::span<const double> w) {
        return detail::grouped_loss(grouped, [&](const Feature& x) {
            one[0] = x;
            return family.eval_params(w, one);
        });
    };

    const std::size_t per_axis = opts.grid_per_axis ? opts.grid_per_axis : default_grid_per_axis(d);
    const double R = ball.radius;
    const double step = per_axis > 1 ? 2.0 * R / static_cast<double>(per_axis - 1) : 0.0;

    std::vector<double> best_w(d, 0.0);
    double best_loss = loss_at(best_w);
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> w(d);
    while (true) {
        for (std::size_t j = 0; j < d; ++j) w[j] = per_axis > 1 ? -R + step * static_cast<double>(idx[j]) : 0.0;
        if (ball.contains(w)) {
            double l = loss_at(w);
            if (l < best_loss) {
                best_loss = l;
                best_w = w;
            }
        }
        std::size_t j = 0;
        while (j < d && ++idx[j] == per_axis) idx[j++] = 0;
        if (j == d) break;
    }
    if (family.kind() == FamilyKind::HardLipschitz) {
        for (const auto& pt : family.hard().packing) {
            double l = loss_at(pt);
            if (l < best_loss) {
                best_loss = l;
                best_w = pt;
            }
        }
    }

    // Coordinate refinement with step halving. For l2 and l_inf balls a step
    // leaving the ball is projected back, so the search can slide along the
    // boundary.
    auto project = [&](std::vector<double>& v) {
        if (ball.contains(v)) return true;
        if (ball.norm_order == 2.0) {
            double n = lp_norm(v, 2.0);
            for (double& c : v) c *= R / n;
        } else if (std::isinf(ball.norm_order)) {
            for (double& c : v) c = std::clamp(c, -R, R);
        }
        return ball.contains(v);
    };
    double h = step > 0 ? step : R / 2.0;
    while (h > opts.refine_tolerance) {
        bool improved = false;
        for (std::size_t j = 0; j < d; ++j) {
            for (double sign : {-1.0, 1.0}) {
                auto cand = best_w;
                cand[j] += sign * h;
                if (!project(cand)) continue;
                double l = loss_at(cand);
                if (l < best_loss) {
                    best_loss = l;
                    best_w = std::move(cand);
                    improved = true;
                }
            }
        }
        if (!improved) h *= 0.5;
    }
    return {best_w, best_loss};
}

// ---------------------------------------------------------------------------
// D_s projection

inline std::vector<double> ds_project(std::span<const double> p, double s) {
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("ds_project: entries must be in [0,1]");
        total += std::pow(v, s);
    }
    std::vector<double> out(p.begin(), p.end());
    if (total <= 1.0) return out;
    double scale = std::pow(total, -1.0 / s);
    for (double& v : out) v *= scale;
    return out;
}

// ---------------------------------------------------------------------------
// Hard Lipschitz construction

struct HardLipschitzClass {
    ExpertFamily family;
    CodeBook codebook;
};

inline constexpr std::size_t kCodebookRetryCap = 10000;

// Points of the cubic lattice spacing * Z^d inside B_2^d(radius), in
// lexicographic order.
inline std::vector<std::vector<double>> lattice_in_l2_ball(std::size_t d, double radius, double spacing) {
    auto J = static_cast<long>(std::floor(radius / spacing + 1e-12));
    std::vector<std::vector<double>> pts;
    std::vector<long> idx(d, -J);
    std::vector<double> w(d);
    while (true) {
        for (std::size_t j = 0; j < d; ++j) w[j] = spacing * static_cast<double>(idx[j]);
        if (lp_norm(w, 2.0) <= radius + 1e-12) pts.push_back(w);
        std::size_t j = d;
        while (j > 0) {
            --j;
            if (++idx[j] <= J) break;
            idx[j] = -J;
            if (j == 0) return pts;
        }
        if (d == 0) return pts;
    }
}

inline HardLipschitzClass build_hard_lipschitz_class(std::size_t d, std::size_t T, double R, double L, double alpha,
                                                     std::uint64_t seed) {
    if (d == 0 || T == 0 || !(R > 0) || !(L > 0) || !(alpha > 0 && alpha < 1))
        throw std::invalid_argument("build_hard_lipschitz_class: need d,T >= 1, R,L > 0, alpha in (0,1)");
    const double raw_m = std::pow(L * R / (2.0 * alpha), static_cast<double>(d));
    if (raw_m < 2.0) throw std::invalid_argument("build_hard_lipschitz_class: floor((LR/(2 alpha))^d) < 2");
    if (raw_m > 1e6) throw std::invalid_argument("build_hard_lipschitz_class: packing too large for desk scale");
    const auto M = static_cast<std::size_t>(std::floor(raw_m));

    auto lattice = lattice_in_l2_ball(d, R, alpha / L);
    if (lattice.size() < M)
        throw std::runtime_error("build_hard_lipschitz_class: lattice packing holds " + std::to_string(lattice.size()) +
                                 " points, need " + std::to_string(M));
    std::vector<std::vector<double>> packing;
    for (std::size_t j = 0; j < M; ++j) {
        std::size_t pick = M == 1 ? 0 : j * (lattice.size() - 1) / (M - 1);
        packing.push_back(lattice[pick]);
    }

    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    CodeBook book;
    bool ok = false;
    for (std::size_t attempt = 0; attempt < kCodebookRetryCap && !ok; ++attempt) {
        book.vectors.assign(M, std::vector<std::uint8_t>(T));
        for (auto& v : book.vectors)
            for (auto& bit : v) bit = coin(rng) ? 1 : 0;
        ok = book.verify();
    }
    if (!ok)
        throw std::runtime_error("build_hard_lipschitz_class: no codebook with distance >= T/4 for (M, T) = (" +
                                 std::to_string(M) + ", " + std::to_string(T) + ") within the retry cap");
    book.min_distance = book.compute_min_distance();

    detail::HardLipschitzData data;
    data.ball = ParamBall{d, R, 2.0};
    data.lipschitz = L;
    data.alpha = alpha;
    for (std::size_t t = 0; t < T; ++t) {
        Feature x(d, 0.0);
        x[0] = static_cast<double>(t + 1);
        data.designated.push_back(std::move(x));
    }
    data.packing = std::move(packing);
    for (const auto& v : book.vectors) {
        std::vector<double> row(T);
        for (std::size_t t = 0; t < T; ++t) row[t] = v[t] ? alpha : 0.0;
        data.table.push_back(std::move(row));
    }
    return {ExpertFamily::hard_lipschitz(std::move(data)), std::move(book)};
}

// ---------------------------------------------------------------------------
// Random finite families

inline ExpertFamily random_finite_static(std::size_t experts, std::size_t domain, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::vector<double>> table(experts, std::vector<double>(domain));
    for (auto& row : table)
        for (double& v : row) v = unif(rng);
    return ExpertFamily::finite_static(std::move(table));
}

// ---------------------------------------------------------------------------
// Tabular text format: one expert per row, whitespace-separated decimals.
//
//   # seqlog experts v1
//   # kind=finite_static domain=3
//   0.25 0.75 0.5
//
// Sequential experts over a finite domain of size n with horizon T list their
// values on every prefix of length 1..T, shorter prefixes first, each length
// in lexicographic order with the first feature most significant.

struct ExpertTable {
    std::string kind = "finite_static";
    std::size_t domain = 0;
    std::size_t horizon = 0;
    std::vector<std::vector<double>> rows;
};

inline void write_expert_table(std::ostream& out, const ExpertTable& table) {
    out << "# seqlog experts v1\n# kind=" << table.kind << " domain=" << table.domain;
    if (table.kind == "finite_sequential") out << " horizon=" << table.horizon;
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? " " : "") << format_double(row[i]);
        out << '\n';
    }
}

inline ExpertTable read_expert_table(std::istream& in) {
    ExpertTable table;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string tok;
            while (ss >> tok) {
                auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
                if (key == "kind") table.kind = val;
                else if (key == "domain") table.domain = std::stoul(val);
                else if (key == "horizon") table.horizon = std::stoul(val);
            }
            continue;
        }
        std::istringstream ss(line);
        std::vector<double> row;
        std::string tok;
        while (ss >> tok) row.push_back(parse_double(tok));
        if (!row.empty()) table.rows.push_back(std::move(row));
    }
    if (table.rows.empty()) throw std::runtime_error("expert table has no rows");
    if (table.domain == 0) table.domain = table.rows.front().size();
    return table;
}

inline std::size_t sequential_table_width(std::size_t domain, std::size_t horizon) {
    std::size_t width = 0, layer = 1;
    for (std::size_t t = 1; t <= horizon; ++t) {
        layer *= domain;
        width += layer;
    }
    return width;
}

// Position of prefix x^t in a sequential table row.
inline std::size_t sequential_table_offset(std::span<const Feature> prefix, std::size_t domain) {
    std::size_t offset = 0, layer = 1;
    for (std::size_t t = 1; t < prefix.size(); ++t) {
        layer *= domain;
        offset += layer;
    }
    std::size_t code = 0;
    for (const auto& x : prefix) code = code * domain + detail::domain_index(x, domain);
    return offset + code;
}

inline ExpertFamily family_from_table(const ExpertTable& table) {
    if (table.kind == "finite_static") return ExpertFamily::finite_static(table.rows);
    if (table.kind == "finite_sequential") {
        auto width = sequential_table_width(table.domain, table.horizon);
        std::vector<SequentialFn> members;
        for (const auto& row : table.rows) {
            if (row.size() != width) throw std::runtime_error("sequential expert row has the wrong width");
            members.push_back([row, domain = table.domain, horizon = table.horizon](std::span<const Feature> prefix) {
                if (prefix.size() > horizon) throw std::out_of_range("prefix longer than the tabulated horizon");
                return row[sequential_table_offset(prefix, domain)];
            });
        }
        return ExpertFamily::finite_sequential(std::move(members));
    }
    throw std::runtime_error("unknown expert table kind '" + table.kind + "'");
}

inline ExpertTable table_from_family(const ExpertFamily& family) {
    if (family.kind() != FamilyKind::FiniteStatic) throw std::invalid_argument("only finite static families tabulate directly");
    return {"finite_static", family.domain_size(), 0, family.table()};
}

inline void write_codebook(std::ostream& out, const CodeBook& book) {
    out << "# seqlog codebook v1\n# vectors=" << book.vectors.size() << " length=" << book.length()
        << " min_distance=" << book.min_distance << '\n';
    for (const auto& v : book.vectors) {
        for (auto bit : v) out << static_cast<char>('0' + bit);
        out << '\n';
    }
}

inline CodeBook read_codebook(std::istream& in) {
    CodeBook book;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::uint8_t> v;
        for (char c : line) {
            if (c == '0' || c == '1') v.push_back(static_cast<std::uint8_t>(c - '0'));
            else if (!std::isspace(static_cast<unsigned char>(c))) throw std::runtime_error("codebook rows must be binary");
        }
        if (!book.vectors.empty() && v.size() != book.length()) throw std::runtime_error("codebook rows differ in length");
        book.vectors.push_back(std::move(v));
    }
    book.min_distance = book.compute_min_distance();
    return book;
}

}  // namespace seqlog
