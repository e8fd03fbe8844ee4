#pragma once

// Global sequential covers: lattice covers of parameter balls, value-level
// covers of finite families, and the M-SOA cover built from the discretized
// 1-shattering number.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seqlog/experts.hpp"
#include "seqlog/loss.hpp"
#include "seqlog/predictors.hpp"

namespace seqlog {

// ceil that ignores floating noise just above an integer (3 / (2 * 0.1) etc.).
inline double robust_ceil(double v) { return std::ceil(v - 1e-9 * std::max(1.0, std::abs(v))); }

class CoverSet {
public:
    enum class Provenance { Grid, Values, Msoa };

    static CoverSet from_points(ExpertFamily family, std::vector<std::vector<double>> points, double alpha) {
        CoverSet c(alpha, Provenance::Grid);
        c.family_ = std::make_shared<const ExpertFamily>(std::move(family));
        c.points_ = std::move(points);
        return c;
    }

    static CoverSet from_functions(std::vector<SequentialFn> members, double alpha, Provenance provenance) {
        CoverSet c(alpha, provenance);
        c.members_ = std::move(members);
        return c;
    }

    double alpha() const { return alpha_; }
    Provenance provenance() const { return provenance_; }
    const char* provenance_name() const {
        switch (provenance_) {
            case Provenance::Grid: return "grid";
            case Provenance::Values: return "values";
            case Provenance::Msoa: return "msoa";
        }
        return "?";
    }
    std::size_t size() const { return family_ ? points_.size() : members_.size(); }
    const std::vector<std::vector<double>>& points() const { return points_; }

    double eval(std::size_t i, std::span<const Feature> prefix) const {
        if (prefix.empty()) throw std::invalid_argument("cover member evaluated on an empty prefix");
        if (family_) {
            const Feature& x = prefix.back();
            if (const LinkFunction* link = family_->link()) return std::clamp(link->map(dot(points_.at(i), x)), 0.0, 1.0);
            if (family_->kind() == FamilyKind::LipschitzParametric) return family_->eval_unchecked(points_.at(i), x);
            return family_->eval_params(points_.at(i), prefix);
        }
        return members_.at(i)(prefix);
    }

    ExpertPool pool() const {
        if (family_) return pool_from_points(*family_, points_);
        auto members = std::make_shared<const std::vector<SequentialFn>>(members_);
        ExpertPool p;
        p.size = members_.size();
        p.evaluate = [members](std::span<const Feature> prefix, std::span<double> out) {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*members)[i](prefix);
        };
        return p;
    }

private:
    CoverSet(double alpha, Provenance provenance) : alpha_(alpha), provenance_(provenance) {}

    double alpha_;
    Provenance provenance_;
    std::shared_ptr<const ExpertFamily> family_;
    std::vector<std::vector<double>> points_;
    std::vector<SequentialFn> members_;
};

// ---------------------------------------------------------------------------
// Lattice cover of the parameter ball

inline constexpr std::size_t kDefaultCoverCap = 10'000'000;

// Cube lattice whose cells have l_s half-diagonal alpha/L, restricted to cells
// meeting the ball. For s = 2 and s = inf centres outside the ball are
// projected onto it (the projection is non-expansive in that norm).
inline CoverSet grid_cover(const ExpertFamily& family, double alpha, std::size_t size_cap = kDefaultCoverCap) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("grid_cover: alpha must be in (0,1)");
    if (family.kind() != FamilyKind::LipschitzParametric && family.kind() != FamilyKind::GeneralizedLinear)
        throw std::invalid_argument("grid_cover needs a Lipschitz parametric family");
    const ParamBall& ball = family.ball();
    const std::size_t d = ball.dimension;
    const double L = family.lipschitz_constant();
    const double R = ball.radius;
    const double s = ball.norm_order;
    const double root = std::isinf(s) ? 1.0 : std::pow(static_cast<double>(d), 1.0 / s);
    if (R <= alpha / L) return CoverSet::from_points(family, {std::vector<double>(d, 0.0)}, alpha);
    const double h = 2.0 * (alpha / L) / root;
    const long J = std::max(0L, static_cast<long>(robust_ceil(R / h - 0.5)));

    const double estimate = std::pow(2.0 * static_cast<double>(J) + 1.0, static_cast<double>(d));
    if (estimate > 1e12) throw std::invalid_argument("grid_cover: lattice of about " + format_double(estimate) + " cells is beyond the cap");

    std::vector<std::vector<double>> pts;
    std::vector<long> idx(d, -J);
    std::vector<double> c(d), gap(d);
    while (true) {
        for (std::size_t j = 0; j < d; ++j) {
            c[j] = h * static_cast<double>(idx[j]);
            gap[j] = std::max(0.0, std::abs(c[j]) - h / 2.0);
        }
        if (lp_norm(gap, s) <= R * (1.0 + 1e-12)) {
            auto w = c;
            double n = lp_norm(w, s);
            if (n > R) {
                if (s == 2.0) {
                    for (double& v : w) v *= R / n;
                } else if (std::isinf(s)) {
                    for (double& v : w) v = std::clamp(v, -R, R);
                }
            }
            pts.push_back(std::move(w));
            if (pts.size() > size_cap)
                throw std::invalid_argument("grid_cover: more than " + std::to_string(size_cap) + " members (lattice of " +
                                            format_double(estimate) + " cells)");
        }
        std::size_t j = 0;
        while (j < d && ++idx[j] > J) idx[j++] = -J;
        if (j == d) break;
    }
    return CoverSet::from_points(family, std::move(pts), alpha);
}

inline double grid_cover_size_bound(double R, double L, double alpha, std::size_t d) {
    return std::pow(2.0 * R * L / alpha + 1.0, static_cast<double>(d));
}

// ---------------------------------------------------------------------------
// Discretization

struct DiscretizedFamily {
    double alpha = 0.0;
    std::vector<double> levels;           // z_1 < ... < z_K, z_k = (2k-1) alpha
    std::vector<std::vector<int>> table;  // [member][x] -> level index in 1..K

    std::size_t level_count() const { return levels.size(); }
    std::size_t domain_size() const { return table.empty() ? 0 : table.front().size(); }
    // Level value clamped to [0,1].
    double level_value(int k) const { return std::min(levels.at(static_cast<std::size_t>(k - 1)), 1.0); }
};

inline std::vector<double> discretization_levels(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("discretization scale must be in (0,1)");
    auto K = static_cast<std::size_t>(robust_ceil(1.0 / (2.0 * alpha)));
    std::vector<double> z(K);
    for (std::size_t k = 0; k < K; ++k) z[k] = static_cast<double>(2 * k + 1) * alpha;
    return z;
}

// Nearest level, ties to the lower index.
inline int nearest_level(double v, const std::vector<double>& levels) {
    int best = 1;
    double dist = std::abs(levels[0] - v);
    for (std::size_t k = 1; k < levels.size(); ++k) {
        double dk = std::abs(levels[k] - v);
        if (dk < dist) {
            dist = dk;
            best = static_cast<int>(k + 1);
        }
    }
    return best;
}

// `table` is [member][x] with values in [0,1].
inline DiscretizedFamily discretize(const std::vector<std::vector<double>>& table, double alpha) {
    DiscretizedFamily out;
    out.alpha = alpha;
    out.levels = discretization_levels(alpha);
    for (const auto& row : table) {
        std::vector<int> r(row.size());
        for (std::size_t x = 0; x < row.size(); ++x) r[x] = nearest_level(row[x], out.levels);
        out.table.push_back(std::move(r));
    }
    return out;
}

inline DiscretizedFamily discretize(const ExpertFamily& family, double alpha) {
    if (family.kind() != FamilyKind::FiniteStatic) throw std::invalid_argument("discretize needs a finite static family");
    return discretize(family.table(), alpha);
}

// Static alpha-cover of a finite static family: every member snapped to its
// nearest level (clamped to [0,1]), duplicates removed.
inline CoverSet value_grid_cover(const ExpertFamily& family, double alpha) {
    auto disc = discretize(family, alpha);
    std::vector<std::vector<double>> rows;
    for (const auto& r : disc.table) {
        std::vector<double> row(r.size());
        for (std::size_t x = 0; x < r.size(); ++x) row[x] = disc.level_value(r[x]);
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    auto snapped = std::make_shared<const ExpertFamily>(ExpertFamily::finite_static(std::move(rows)));
    std::vector<SequentialFn> members;
    for (std::size_t i = 0; i < snapped->size(); ++i)
        members.push_back([snapped, i](std::span<const Feature> prefix) { return snapped->eval_index(i, prefix); });
    return CoverSet::from_functions(std::move(members), alpha, CoverSet::Provenance::Values);
}

// ---------------------------------------------------------------------------
// Shattering numbers

using SubsetMask = std::uint64_t;

struct ShatterResult {
    int value = -1;
    bool at_cap = false;  // true value is >= `value`
};

// Feature-labelled tree with witnesses; nodes indexed by (depth, path bits).
struct ShatterTree {
    int depth = 0;
    std::map<std::pair<int, std::uint64_t>, std::size_t> features;
    std::map<std::pair<int, std::uint64_t>, double> witnesses;

    bool complete() const {
        for (int t = 0; t < depth; ++t)
            for (std::uint64_t p = 0; p < (std::uint64_t{1} << t); ++p)
                if (!features.count({t, p}) || !witnesses.count({t, p})) return false;
        return true;
    }
};

// Exhaustive shattering search over a finite table [member][x]. A split at
// (x, s) sends members with value <= s - margin left and >= s + margin right.
class ShatterSearch {
public:
    ShatterSearch(std::vector<std::vector<double>> table, double margin, std::vector<std::vector<double>> witness_candidates)
        : table_(std::move(table)), margin_(margin), candidates_(std::move(witness_candidates)) {
        if (table_.size() > 64) throw std::invalid_argument("shattering search supports at most 64 members");
        for (const auto& row : table_)
            if (row.size() != candidates_.size()) throw std::invalid_argument("table width does not match the feature set");
    }

    // Witnesses for the real-valued notion: midpoints of value pairs at least
    // 2 alpha apart.
    static ShatterSearch fat(const std::vector<std::vector<double>>& table, double alpha) {
        std::size_t n = table.empty() ? 0 : table.front().size();
        std::vector<std::vector<double>> cands(n);
        for (std::size_t x = 0; x < n; ++x) {
            std::vector<double> vals;
            for (const auto& row : table) vals.push_back(row[x]);
            std::sort(vals.begin(), vals.end());
            vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
            for (std::size_t i = 0; i < vals.size(); ++i)
                for (std::size_t j = i + 1; j < vals.size(); ++j)
                    if (vals[j] - vals[i] >= 2.0 * alpha - kTol) cands[x].push_back(0.5 * (vals[i] + vals[j]));
            std::sort(cands[x].begin(), cands[x].end());
            cands[x].erase(std::unique(cands[x].begin(), cands[x].end()), cands[x].end());
        }
        return ShatterSearch(table, alpha, std::move(cands));
    }

    // Level-index notion with margin one and witnesses s in [K].
    static ShatterSearch level(const DiscretizedFamily& family) {
        std::vector<std::vector<double>> table;
        for (const auto& r : family.table) table.emplace_back(r.begin(), r.end());
        std::vector<double> ks;
        for (std::size_t k = 1; k <= family.level_count(); ++k) ks.push_back(static_cast<double>(k));
        return ShatterSearch(std::move(table), 1.0, std::vector<std::vector<double>>(family.domain_size(), ks));
    }

    std::size_t members() const { return table_.size(); }
    std::size_t domain_size() const { return candidates_.size(); }
    SubsetMask all() const { return table_.size() == 64 ? ~SubsetMask{0} : (SubsetMask{1} << table_.size()) - 1; }

    // min(depth, cap) for the subfamily `mask`.
    int depth(SubsetMask mask, int cap) {
        if (mask == 0) return -1;
        if (cap <= 0) return 0;
        auto key = std::make_pair(mask, cap);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        int best = 0;
        for (std::size_t x = 0; x < candidates_.size() && best < cap; ++x) {
            for (double s : candidates_[x]) {
                auto [lo, hi] = split(mask, x, s);
                if (lo == 0 || hi == 0) continue;
                int a = depth(lo, cap - 1);
                if (a + 1 <= best) continue;
                int b = depth(hi, cap - 1);
                best = std::max(best, 1 + std::min(a, b));
                if (best >= cap) break;
            }
        }
        memo_.emplace(key, best);
        return best;
    }

    ShatterResult number(SubsetMask mask, int depth_cap) {
        if (depth_cap < 0) throw std::invalid_argument("depth cap must be nonnegative");
        int v = depth(mask, depth_cap);
        return {v, mask != 0 && v == depth_cap};
    }

    std::pair<SubsetMask, SubsetMask> split(SubsetMask mask, std::size_t x, double s) const {
        SubsetMask lo = 0, hi = 0;
        for (std::size_t h = 0; h < table_.size(); ++h) {
            if (!((mask >> h) & 1U)) continue;
            double v = table_[h][x];
            if (v <= s - margin_ + kTol) lo |= SubsetMask{1} << h;
            if (v >= s + margin_ - kTol) hi |= SubsetMask{1} << h;
        }
        return {lo, hi};
    }

    // Members of `mask` whose value at x equals `value`.
    SubsetMask restrict_to(SubsetMask mask, std::size_t x, double value) const {
        SubsetMask out = 0;
        for (std::size_t h = 0; h < table_.size(); ++h)
            if (((mask >> h) & 1U) && table_[h][x] == value) out |= SubsetMask{1} << h;
        return out;
    }

    // A depth-`target` certificate for `mask`, or nullopt.
    std::optional<ShatterTree> certificate(SubsetMask mask, int target) {
        ShatterTree tree;
        tree.depth = target;
        if (!build(mask, target, 0, 0, tree)) return std::nullopt;
        return tree;
    }

    // Checks every root-to-leaf path is realised by a member of `mask`.
    bool verify(const ShatterTree& tree, SubsetMask mask) const {
        if (!tree.complete()) return false;
        for (std::uint64_t eps = 0; eps < (std::uint64_t{1} << tree.depth); ++eps) {
            SubsetMask live = mask;
            std::uint64_t path = 0;
            for (int t = 0; t < tree.depth; ++t) {
                auto node = std::make_pair(t, path);
                auto [lo, hi] = split(live, tree.features.at(node), tree.witnesses.at(node));
                int bit = static_cast<int>((eps >> t) & 1U);
                live = bit ? hi : lo;
                path |= static_cast<std::uint64_t>(bit) << t;
            }
            if (live == 0) return false;
        }
        return true;
    }

private:
    static constexpr double kTol = 1e-12;

    bool build(SubsetMask mask, int remaining, int level, std::uint64_t path, ShatterTree& tree) {
        if (mask == 0) return false;
        if (remaining == 0) return true;
        for (std::size_t x = 0; x < candidates_.size(); ++x)
            for (double s : candidates_[x]) {
                auto [lo, hi] = split(mask, x, s);
                if (depth(lo, remaining - 1) < remaining - 1 || depth(hi, remaining - 1) < remaining - 1) continue;
                tree.features[{level, path}] = x;
                tree.witnesses[{level, path}] = s;
                return build(lo, remaining - 1, level + 1, path, tree) &&
                       build(hi, remaining - 1, level + 1, path | (std::uint64_t{1} << level), tree);
            }
        return false;
    }

    struct KeyHash {
        std::size_t operator()(const std::pair<SubsetMask, int>& k) const {
            return std::hash<SubsetMask>{}(k.first * 0x9E3779B97F4A7C15ULL + static_cast<SubsetMask>(k.second));
        }
    };

    std::vector<std::vector<double>> table_;
    double margin_;
    std::vector<std::vector<double>> candidates_;
    std::unordered_map<std::pair<SubsetMask, int>, int, KeyHash> memo_;
};

inline constexpr int kDefaultDepthCap = 16;

// Sequential alpha-fat-shattering number of a finite table [member][x].
inline ShatterResult fat_shattering_number(const std::vector<std::vector<double>>& table, double alpha, int depth_cap = kDefaultDepthCap) {
    if (table.empty()) return {-1, false};
    auto search = ShatterSearch::fat(table, alpha);
    return search.number(search.all(), depth_cap);
}

inline ShatterResult fat1_number(const DiscretizedFamily& family, int depth_cap = kDefaultDepthCap) {
    if (family.table.empty()) return {-1, false};
    auto search = ShatterSearch::level(family);
    return search.number(search.all(), depth_cap);
}

// ---------------------------------------------------------------------------
// M-SOA

struct MsoaRun {
    std::vector<int> predictions;
    std::size_t errors = 0;
};

// Running state of M-SOA over a discretized family; prediction is the level
// whose consistent subfamily has the largest FAT_1, ties to the lowest level.
class Msoa {
public:
    Msoa(std::shared_ptr<ShatterSearch> search, std::size_t levels, int depth_cap)
        : search_(std::move(search)), levels_(levels), cap_(depth_cap), live_(search_->all()) {}

    int predict(std::size_t x) {
        int best_k = 1, best_v = -2;
        for (std::size_t k = 1; k <= levels_; ++k) {
            int v = search_->depth(search_->restrict_to(live_, x, static_cast<double>(k)), cap_);
            if (v > best_v) {
                best_v = v;
                best_k = static_cast<int>(k);
            }
        }
        return best_k;
    }

    // Standard update: restrict only on an error (|prediction - y| >= 2).
    bool observe(std::size_t x, int prediction, int y) {
        bool error = std::abs(prediction - y) >= 2;
        if (error) force(x, y);
        return error;
    }

    void force(std::size_t x, int k) { live_ = search_->restrict_to(live_, x, static_cast<double>(k)); }
    SubsetMask live() const { return live_; }

private:
    std::shared_ptr<ShatterSearch> search_;
    std::size_t levels_;
    int cap_;
    SubsetMask live_;
};

inline MsoaRun msoa_run(const DiscretizedFamily& family, std::span<const std::size_t> xs, std::span<const int> ys,
                        bool realizable_promise = false, int depth_cap = kDefaultDepthCap) {
    if (xs.size() != ys.size()) throw std::invalid_argument("msoa_run: length mismatch");
    auto search = std::make_shared<ShatterSearch>(ShatterSearch::level(family));
    Msoa m(search, family.level_count(), depth_cap);
    MsoaRun run;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        if (xs[t] >= family.domain_size()) throw std::invalid_argument("msoa_run: feature index out of range");
        int p = m.predict(xs[t]);
        run.predictions.push_back(p);
        if (m.observe(xs[t], p, ys[t])) ++run.errors;
        if (realizable_promise && m.live() == 0)
            throw std::logic_error("msoa_run: running family became empty on a sequence promised to be realizable");
    }
    return run;
}

// ---------------------------------------------------------------------------
// Cover size bounds

// ln sum_{t=0}^{dfat} C(T,t) ceil(3/(2 alpha))^t
inline double log_cover_size_bound(double T, double alpha, int dfat) {
    if (dfat < 0) return kNegInf;
    double K = robust_ceil(3.0 / (2.0 * alpha));
    std::vector<double> terms;
    for (int t = 0; t <= dfat && t <= T; ++t) terms.push_back(detail::log_binomial(T, t) + t * std::log(K));
    return detail::log_sum_exp(terms);
}

inline double cover_size_bound(double T, double alpha, int dfat) { return std::exp(log_cover_size_bound(T, alpha, dfat)); }

// ln ceil(3T/(2 alpha))^{dfat+1}
inline double log_cover_size_power_bound(double T, double alpha, int dfat) {
    return (dfat + 1.0) * std::log(robust_ceil(3.0 * T / (2.0 * alpha)));
}

// ---------------------------------------------------------------------------
// M-SOA cover

inline constexpr std::size_t kDefaultMsoaCoverCap = 1'000'000;

struct MsoaCoverInfo {
    int fat1 = 0;
    std::size_t levels = 0;
    std::size_t members = 0;
};

// Every (I, {k_t}) with |I| <= FAT_1 defines a member: M-SOA forced to level
// k_t at steps in I (and emitting k_t there), unchanged elsewhere. Values are
// the levels z_k clamped to [0,1]; the result covers the family at scale 3 alpha.
inline std::pair<CoverSet, MsoaCoverInfo> msoa_cover(const std::vector<std::vector<double>>& table, double alpha, std::size_t T,
                                                     std::size_t size_cap = kDefaultMsoaCoverCap, int depth_cap = kDefaultDepthCap) {
    if (table.empty()) throw std::invalid_argument("msoa_cover: empty family");
    auto disc = std::make_shared<const DiscretizedFamily>(discretize(table, alpha));
    auto search = std::make_shared<ShatterSearch>(ShatterSearch::level(*disc));
    MsoaCoverInfo info;
    info.levels = disc->level_count();
    auto fat = search->number(search->all(), depth_cap);
    if (fat.at_cap) throw std::invalid_argument("msoa_cover: FAT_1 reached the depth cap");
    info.fat1 = fat.value;

    double log_count = log_cover_size_bound(static_cast<double>(T), 3.0 * alpha, info.fat1);
    double exact = 0.0;
    for (int t = 0; t <= info.fat1 && t <= static_cast<int>(T); ++t)
        exact += std::exp(detail::log_binomial(static_cast<double>(T), t) + t * std::log(static_cast<double>(info.levels)));
    if (exact > static_cast<double>(size_cap))
        throw std::invalid_argument("msoa_cover: " + format_double(std::round(exact)) + " members exceed the cap (size bound e^" +
                                    format_double(log_count) + ")");

    struct Plan {
        std::vector<std::size_t> steps;  // sorted, 0-based
        std::vector<int> levels;
    };
    std::vector<Plan> plans;
    std::vector<std::size_t> subset;
    std::function<void(std::size_t)> choose = [&](std::size_t start) {
        // every subset of size <= fat1, each with all level assignments
        std::vector<int> ks(subset.size(), 1);
        while (true) {
            plans.push_back({subset, ks});
            std::size_t j = 0;
            while (j < ks.size() && ++ks[j] > static_cast<int>(info.levels)) ks[j++] = 1;
            if (j == ks.size()) break;
        }
        if (static_cast<int>(subset.size()) == info.fat1) return;
        for (std::size_t t = start; t < T; ++t) {
            subset.push_back(t);
            choose(t + 1);
            subset.pop_back();
        }
    };
    choose(0);

    const int cap = depth_cap;
    std::vector<SequentialFn> members;
    members.reserve(plans.size());
    for (auto& plan : plans) {
        members.push_back([disc, search, plan, cap](std::span<const Feature> prefix) {
            Msoa m(search, disc->level_count(), cap);
            int out = 1;
            for (std::size_t t = 0; t < prefix.size(); ++t) {
                std::size_t x = detail::domain_index(prefix[t], disc->domain_size());
                auto it = std::lower_bound(plan.steps.begin(), plan.steps.end(), t);
                if (it != plan.steps.end() && *it == t) {
                    int k = plan.levels[static_cast<std::size_t>(it - plan.steps.begin())];
                    m.force(x, k);
                    out = k;
                } else {
                    out = m.predict(x);
                }
            }
            return disc->level_value(out);
        });
    }
    info.members = members.size();
    return {CoverSet::from_functions(std::move(members), 3.0 * alpha, CoverSet::Provenance::Msoa), info};
}

// ---------------------------------------------------------------------------
// Tabular form of a cover over a finite domain. horizon 0 gives a static table
// (members evaluated on one-feature prefixes); otherwise every prefix up to
// `horizon` is listed in the sequential layout.

inline ExpertTable cover_table(const CoverSet& cover, std::size_t domain, std::size_t horizon = 0) {
    if (domain == 0) throw std::invalid_argument("cover_table: empty domain");
    ExpertTable table;
    table.domain = domain;
    table.horizon = horizon;
    table.kind = horizon == 0 ? "finite_static" : "finite_sequential";
    const std::size_t width = horizon == 0 ? domain : sequential_table_width(domain, horizon);
    if (width > 10'000'000 / std::max<std::size_t>(1, cover.size())) throw std::invalid_argument("cover_table: table too large");
    for (std::size_t i = 0; i < cover.size(); ++i) {
        std::vector<double> row;
        row.reserve(width);
        if (horizon == 0) {
            for (std::size_t x = 0; x < domain; ++x) {
                Features prefix{{static_cast<double>(x)}};
                row.push_back(cover.eval(i, prefix));
            }
        } else {
            for (std::size_t t = 1; t <= horizon; ++t) {
                Features prefix(t, Feature{0.0});
                std::size_t count = 1;
                for (std::size_t j = 0; j < t; ++j) count *= domain;
                for (std::size_t code = 0; code < count; ++code) {
                    std::size_t c = code;
                    for (std::size_t j = t; j-- > 0;) {
                        prefix[j][0] = static_cast<double>(c % domain);
                        c /= domain;
                    }
                    row.push_back(cover.eval(i, prefix));
                }
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace seqlog
