#pragma once

// Shtarkov sums, fixed-design game values and the lower-bound constructions
// built on them.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
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
#include "seqlog/predictors.hpp"

namespace seqlog {

// ln of max_{w in [lo,hi]} w^k (1-w)^(n-k); the unconstrained maximiser k/n is
// clamped into the interval.
inline double interval_bernoulli_log_sup(double n, double k, double lo, double hi) {
    double w = std::clamp(k / n, lo, hi);
    double out = 0.0;
    if (k > 0) out += w > 0.0 ? k * std::log(w) : kNegInf;
    if (n - k > 0) out += w < 1.0 ? (n - k) * std::log1p(-w) : kNegInf;
    return out;
}

// k ln(k/n) + (n-k) ln(1-k/n) with 0 ln 0 = 0.
inline double bernoulli_mle_log_sup(double n, double k) {
    if (n == 0) return 0.0;
    return detail::xlogx(k) + detail::xlogx(n - k) - n * std::log(n);
}

// -(k/s) ln k, zero for k = 0; s = inf gives 0.
inline double ds_log_sup(double k, double s) {
    if (k <= 1 || std::isinf(s)) return 0.0;
    return -(k / s) * std::log(k);
}

class SupOracle {
public:
    enum class Kind { FiniteMax, ConstantBernoulliMLE, IntervalBernoulli, DsClosedForm, BlockProduct };

    static SupOracle finite_max(ExpertFamily family) {
        if (!family.is_finite()) throw std::invalid_argument("finite_max needs a finite family");
        SupOracle o(Kind::FiniteMax);
        o.family_ = std::make_shared<const ExpertFamily>(std::move(family));
        return o;
    }
    static SupOracle constant_bernoulli() { return SupOracle(Kind::ConstantBernoulliMLE); }
    static SupOracle interval_bernoulli(double lo, double hi) {
        if (!(0.0 <= lo && lo <= hi && hi <= 1.0)) throw std::invalid_argument("interval must satisfy 0 <= lo <= hi <= 1");
        SupOracle o(Kind::IntervalBernoulli);
        o.lo_ = lo;
        o.hi_ = hi;
        return o;
    }
    static SupOracle ds_closed_form(double s) {
        if (!(s >= 1.0)) throw std::invalid_argument("D_s needs s >= 1");
        SupOracle o(Kind::DsClosedForm);
        o.s_ = s;
        return o;
    }
    // Link family on a block design with each coordinate restricted to
    // [-half_width, half_width]; per block the link's image interval acts as
    // an interval-Bernoulli family.
    static SupOracle block_product(const LinkFunction& link, std::size_t d, double half_width) {
        if (d == 0 || !(half_width > 0)) throw std::invalid_argument("block_product needs d >= 1 and a positive half width");
        SupOracle o(Kind::BlockProduct);
        double a = link(-half_width), b = link(half_width);
        o.lo_ = std::min(a, b);
        o.hi_ = std::max(a, b);
        o.blocks_ = d;
        o.link_name_ = link.name;
        return o;
    }

    Kind kind() const { return kind_; }
    const char* name() const {
        switch (kind_) {
            case Kind::FiniteMax: return "finite_max";
            case Kind::ConstantBernoulliMLE: return "bernoulli";
            case Kind::IntervalBernoulli: return "interval";
            case Kind::DsClosedForm: return "ds";
            case Kind::BlockProduct: return "block";
        }
        return "?";
    }
    bool exchangeable() const {
        return kind_ == Kind::ConstantBernoulliMLE || kind_ == Kind::IntervalBernoulli || kind_ == Kind::DsClosedForm;
    }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double s() const { return s_; }
    std::size_t blocks() const { return blocks_; }
    const ExpertFamily* family() const { return family_.get(); }

    // ln sup for a sequence of length n with k ones (exchangeable kinds).
    double log_sup_count(double n, double k) const {
        switch (kind_) {
            case Kind::ConstantBernoulliMLE: return bernoulli_mle_log_sup(n, k);
            case Kind::IntervalBernoulli: return interval_bernoulli_log_sup(n, k, lo_, hi_);
            case Kind::DsClosedForm: return ds_log_sup(k, s_);
            default: throw std::logic_error(std::string("oracle ") + name() + " is not exchangeable");
        }
    }

    // ln sup_h p_h(y^T | x^T).
    double log_sup(std::span<const Label> ys, std::span<const Feature> xs) const {
        if (kind_ == Kind::FiniteMax) {
            if (xs.size() != ys.size()) throw std::invalid_argument("log_sup: length mismatch");
            double best = kNegInf;
            for (std::size_t i = 0; i < family_->size(); ++i) {
                double ll = 0.0;
                for (std::size_t t = 0; t < ys.size() && ll > kNegInf; ++t)
                    ll += detail::log_likelihood(family_->eval_index(i, xs.first(t + 1)), ys[t].value());
                best = std::max(best, ll);
            }
            return best;
        }
        if (kind_ == Kind::BlockProduct) {
            if (xs.size() != ys.size()) throw std::invalid_argument("log_sup: length mismatch");
            std::vector<double> n(blocks_, 0.0), k(blocks_, 0.0);
            for (std::size_t t = 0; t < ys.size(); ++t) {
                std::size_t i = basis_index(xs[t]);
                n[i] += 1.0;
                k[i] += ys[t].value();
            }
            double total = 0.0;
            for (std::size_t i = 0; i < blocks_; ++i)
                if (n[i] > 0) total += interval_bernoulli_log_sup(n[i], k[i], lo_, hi_);
            return total;
        }
        double k = 0.0;
        for (auto y : ys) k += y.value();
        return log_sup_count(static_cast<double>(ys.size()), k);
    }

    std::size_t basis_index(const Feature& x) const {
        if (x.size() != blocks_) throw std::invalid_argument("block oracle feature has the wrong dimension");
        std::size_t idx = blocks_;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] == 1.0 && idx == blocks_) idx = i;
            else if (x[i] != 0.0) throw std::invalid_argument("block oracle needs standard basis features");
        }
        if (idx == blocks_) throw std::invalid_argument("block oracle needs standard basis features");
        return idx;
    }

private:
    explicit SupOracle(Kind kind) : kind_(kind) {}

    Kind kind_;
    std::shared_ptr<const ExpertFamily> family_;
    double lo_ = 0.0, hi_ = 1.0, s_ = 1.0;
    std::size_t blocks_ = 0;
    std::string link_name_;
};

// ---------------------------------------------------------------------------
// Leaves and sums

// ln sup at all 2^T leaves; bit t of the index is label t+1.
inline std::vector<double> leaf_log_sups(const SupOracle& oracle, const Features& xs, std::size_t cap = kEnumerationCap) {
    const std::size_t T = xs.size();
    if (T > cap) throw std::invalid_argument("enumeration over 2^" + std::to_string(T) + " leaves exceeds the cap of T = " + std::to_string(cap));
    const std::size_t n = std::size_t{1} << T;
    std::vector<double> leaves(n);
    if (oracle.kind() == SupOracle::Kind::FiniteMax) {
        // depth-first over label prefixes, carrying every expert's log-likelihood
        const ExpertFamily& fam = *oracle.family();
        const std::size_t H = fam.size();
        std::vector<std::vector<double>> values(T, std::vector<double>(H));
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t h = 0; h < H; ++h) values[t][h] = fam.eval_index(h, std::span<const Feature>(xs).first(t + 1));
        std::vector<std::vector<double>> ll(T + 1, std::vector<double>(H, 0.0));
        // Walk a counter r whose most significant bit is label 1, so consecutive
        // values share the longest possible label prefix.
        std::vector<int> labels(T, 0);
        for (std::uint64_t r = 0; r < n; ++r) {
            std::size_t from = 0;
            if (r > 0) from = T - 1 - static_cast<std::size_t>(std::countr_zero(r));
            std::uint64_t m = 0;
            for (std::size_t t = 0; t < T; ++t) {
                labels[t] = static_cast<int>((r >> (T - 1 - t)) & 1U);
                m |= static_cast<std::uint64_t>(labels[t]) << t;
            }
            for (std::size_t t = from; t < T; ++t)
                for (std::size_t h = 0; h < H; ++h) ll[t + 1][h] = ll[t][h] + detail::log_likelihood(values[t][h], labels[t]);
            leaves[m] = T ? *std::max_element(ll[T].begin(), ll[T].end()) : 0.0;
        }
        return leaves;
    }
    Labels ys(T);
    for (std::uint64_t m = 0; m < n; ++m) {
        for (std::size_t t = 0; t < T; ++t) ys[t] = Label(static_cast<int>((m >> t) & 1U));
        leaves[m] = oracle.log_sup(ys, xs);
    }
    return leaves;
}

// ln sum_k C(n,k) e^{log_sup(n,k)}
template <class F>
double binomial_log_sum(std::size_t n, F&& log_sup) {
    std::vector<double> terms(n + 1);
    for (std::size_t k = 0; k <= n; ++k)
        terms[k] = detail::log_binomial(static_cast<double>(n), static_cast<double>(k)) + log_sup(static_cast<double>(n), static_cast<double>(k));
    return detail::log_sum_exp(terms);
}

inline constexpr std::size_t kExchangeableCap = 10'000'000;

// ln S_T for exchangeable oracles (and block products on a balanced block
// design) without enumerating label sequences.
inline double shtarkov_sum(const SupOracle& oracle, std::size_t T) {
    if (T > kExchangeableCap) throw std::invalid_argument("horizon too large");
    if (oracle.exchangeable())
        return binomial_log_sum(T, [&](double n, double k) { return oracle.log_sup_count(n, k); });
    if (oracle.kind() == SupOracle::Kind::BlockProduct) {
        const std::size_t d = oracle.blocks();
        if (T % d != 0) throw std::invalid_argument("block design needs d | T");
        return static_cast<double>(d) *
               binomial_log_sum(T / d, [&](double n, double k) { return interval_bernoulli_log_sup(n, k, oracle.lo(), oracle.hi()); });
    }
    throw std::invalid_argument(std::string("oracle ") + oracle.name() + " needs features; use the enumerating form");
}

// ln S_T(H | x^T). Exchangeable oracles use binomial grouping; anything else
// enumerates all 2^T label sequences (flat max-shifted sum).
inline double shtarkov_sum(const SupOracle& oracle, const Features& xs, std::size_t cap = kEnumerationCap) {
    if (oracle.exchangeable()) return shtarkov_sum(oracle, xs.size());
    return detail::log_sum_exp(leaf_log_sups(oracle, xs, cap));
}

inline GameValueTable minimax_value(const SupOracle& oracle, const Features& xs, std::size_t cap = kEnumerationCap) {
    return game_table_from_leaves(leaf_log_sups(oracle, xs, cap), xs.size());
}

inline NmlPredictor nml_predict(const SupOracle& oracle, const Features& xs, std::size_t cap = kEnumerationCap) {
    return NmlPredictor(std::make_shared<const GameValueTable>(minimax_value(oracle, xs, cap)));
}

// ---------------------------------------------------------------------------
// D_s

struct DsSupCheck {
    double closed_form = 0.0;  // ln sup
    double brute = 0.0;        // ln of the grid maximum
};

// Grid maximisation of p(y^T) over D_s: each p_t on a grid of step 1/grid,
// budget sum p_t^s <= 1 tracked in `budget_cells` cells, consumption rounded
// up (so every grid point used is feasible).
inline DsSupCheck ds_sup_verify(std::span<const Label> ys, double s, std::size_t grid = 5000, std::size_t budget_cells = 30000) {
    if (ys.size() > 8) throw std::invalid_argument("ds_sup_verify: brute grid limited to T <= 8");
    double k = 0.0;
    for (auto y : ys) k += y.value();
    DsSupCheck out;
    out.closed_form = ds_log_sup(k, s);

    std::vector<double> value(grid + 1);
    std::vector<std::size_t> cost(grid + 1);
    for (std::size_t g = 0; g <= grid; ++g) {
        double p = static_cast<double>(g) / static_cast<double>(grid);
        double c = std::isinf(s) ? (p >= 1.0 ? 1.0 : 0.0) : std::pow(p, s);
        cost[g] = static_cast<std::size_t>(std::ceil(c * static_cast<double>(budget_cells) - 1e-9));
    }
    std::vector<double> best(budget_cells + 1, kNegInf), next(budget_cells + 1);
    best[0] = 0.0;
    for (auto y : ys) {
        // p = 0 at no cost dominates every other choice for a zero label
        if (y.value() == 0) continue;
        std::fill(next.begin(), next.end(), kNegInf);
        for (std::size_t g = 0; g <= grid; ++g) {
            double p = static_cast<double>(g) / static_cast<double>(grid);
            double v = detail::log_likelihood(p, y.value());
            if (v == kNegInf) continue;
            for (std::size_t b = 0; b + cost[g] <= budget_cells; ++b)
                if (best[b] > kNegInf) next[b + cost[g]] = std::max(next[b + cost[g]], best[b] + v);
        }
        best.swap(next);
    }
    out.brute = *std::max_element(best.begin(), best.end());
    return out;
}

struct DsLowerBound {
    double exact = 0.0;    // ln sum_k C(T,k) k^{-k/s}
    double formula = 0.0;  // ((s+1)/(s e)) T^{s/(s+1)}
};

inline double ds_formula(double T, double s) {
    if (T <= 0) return 0.0;
    if (std::isinf(s)) return T / std::exp(1.0);
    return (s + 1.0) / (s * std::exp(1.0)) * std::pow(T, s / (s + 1.0));
}

inline DsLowerBound ds_lower_bound(std::size_t T, double s) {
    if (T > 100'000) throw std::invalid_argument("ds_lower_bound: T above 1e5");
    return {shtarkov_sum(SupOracle::ds_closed_form(s), T), ds_formula(static_cast<double>(T), s)};
}

// ---------------------------------------------------------------------------
// Identification bound

struct IdentificationResult {
    double shtarkov = 0.0;                 // S = sum_x max_p p(x)
    double bound = 0.0;                    // 1 - S/|P|
    std::optional<double> optimum;         // min_Phi max_p p(Phi != p), when enumerated
};

inline constexpr double kIdentificationCap = 1e6;

// `dists` are distributions over a common finite outcome set.
inline IdentificationResult identification_bound(const std::vector<std::vector<double>>& dists) {
    if (dists.empty()) throw std::invalid_argument("identification_bound: empty class");
    const std::size_t P = dists.size(), X = dists.front().size();
    for (const auto& p : dists) {
        if (p.size() != X) throw std::invalid_argument("identification_bound: distributions differ in support size");
        double total = 0.0;
        for (double v : p) {
            if (v < 0) throw std::invalid_argument("identification_bound: negative probability");
            total += v;
        }
        if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("identification_bound: probabilities must sum to 1");
    }
    IdentificationResult r;
    for (std::size_t x = 0; x < X; ++x) {
        double m = 0.0;
        for (const auto& p : dists) m = std::max(m, p[x]);
        r.shtarkov += m;
    }
    r.bound = 1.0 - r.shtarkov / static_cast<double>(P);
    if (std::pow(static_cast<double>(P), static_cast<double>(X)) > kIdentificationCap) return r;

    // every estimator Phi: outcomes -> class, as a base-P counter
    std::vector<std::size_t> phi(X, 0);
    double best = kInf;
    while (true) {
        double worst = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
            double err = 0.0;
            for (std::size_t x = 0; x < X; ++x)
                if (phi[x] != p) err += dists[p][x];
            worst = std::max(worst, err);
        }
        best = std::min(best, worst);
        std::size_t j = 0;
        while (j < X && ++phi[j] == P) phi[j++] = 0;
        if (j == X) break;
    }
    r.optimum = best;
    return r;
}

// ---------------------------------------------------------------------------
// Block design

struct BlockDesign {
    Features features;
    std::size_t horizon = 0;   // after trimming to a multiple of d
    std::size_t requested = 0;
    bool trimmed() const { return horizon != requested; }
};

inline BlockDesign block_design_features(std::size_t d, std::size_t T) {
    if (d == 0) throw std::invalid_argument("block design needs d >= 1");
    if (d > T) throw std::invalid_argument("block design needs d <= T");
    BlockDesign out;
    out.requested = T;
    const std::size_t n = T / d;
    out.horizon = n * d;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            Feature x(d, 0.0);
            x[i] = 1.0;
            out.features.push_back(std::move(x));
        }
    return out;
}

// ln sum_k C(n,k) sup_{w in [c1 - c2 d^-r, c1 + c2 d^-r]} w^k (1-w)^(n-k)
inline double restricted_binomial_shtarkov(std::size_t n, double c1, double c2, double r, double d) {
    if (n == 0) throw std::invalid_argument("restricted_binomial_shtarkov: n must be positive");
    double u = c2 * std::pow(d, -r);
    double lo = c1 - u, hi = c1 + u;
    if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) throw std::invalid_argument("restricted interval escapes [0,1]");
    return binomial_log_sum(n, [&](double nn, double k) { return interval_bernoulli_log_sup(nn, k, lo, hi); });
}

// Certified lower bound on ln S_T for the link family over B_s^d(1) on the
// block design: d copies of the restricted binomial sum with r = 1/s.
inline double block_shtarkov_lower(std::size_t d, std::size_t T, const LinkFunction& link, double s) {
    auto design_T = (T / d) * d;
    if (d == 0 || design_T == 0) throw std::invalid_argument("block_shtarkov_lower needs 1 <= d <= T");
    const double r = std::isinf(s) ? 0.0 : 1.0 / s;
    if (!link.contains_interval(static_cast<double>(d), r))
        throw std::invalid_argument("link '" + link.name + "' fails the interval containment check at d = " + std::to_string(d));
    const std::size_t n = design_T / d;
    if (n > 100'000) throw std::invalid_argument("block length above 1e5");
    return static_cast<double>(d) * restricted_binomial_shtarkov(n, link.c1, link.c2, r, static_cast<double>(d));
}

// (d/2) ln(T / d^{(s+2)/s})
inline double block_leading_term(double d, double T, double s) {
    double expo = std::isinf(s) ? 1.0 : (s + 2.0) / s;
    return 0.5 * d * std::log(T / std::pow(d, expo));
}

// ---------------------------------------------------------------------------
// Hard Lipschitz certificate

struct HardClassReport {
    std::size_t members = 0;
    std::size_t horizon = 0;
    double alpha = 0.0;
    std::size_t min_distance = 0;
    bool distance_ok = false;
    std::size_t trials = 0;
    std::size_t errors = 0;
    double error_rate = 0.0;
    double std_error = 0.0;          // binomial standard error at the analytic rate
    double analytic_bound = 0.0;     // |M|^2 e^{-alpha T / 8}
    double implied_lower = 0.0;      // ln(|M|/2)
    bool informative = false;        // |M| > 2 and error <= 1/2
    double formula = 0.0;            // d ln(RLT/d) - d ln 64 - d ln ln(RLT)
};

inline double hard_lipschitz_formula(double d, double R, double L, double T) {
    return d * std::log(R * L * T / d) - d * std::log(64.0) - d * std::log(std::log(R * L * T));
}

// Samples a true member uniformly, draws y_t ~ Bern(u[t]) on the designated
// features and identifies the source by pairwise all-zeros tests on the
// larger one-directional differing set.
inline HardClassReport hard_class_certificate(const HardLipschitzClass& cls, std::size_t trials, std::uint64_t seed) {
    const auto& data = cls.family.hard();
    const auto& book = cls.codebook;
    const std::size_t M = book.vectors.size(), T = book.length();
    if (M != data.table.size() || T != data.designated.size())
        throw std::invalid_argument("hard_class_certificate: codebook does not match the family");
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t t = 0; t < T; ++t)
            if (data.table[j][t] != (book.vectors[j][t] ? data.alpha : 0.0))
                throw std::invalid_argument("hard_class_certificate: codebook does not match the family");

    HardClassReport rep;
    rep.members = M;
    rep.horizon = T;
    rep.alpha = data.alpha;
    rep.min_distance = book.compute_min_distance();
    rep.distance_ok = 4 * rep.min_distance >= T;
    rep.analytic_bound = static_cast<double>(M * M) * std::exp(-data.alpha * static_cast<double>(T) / 8.0);
    rep.implied_lower = std::log(static_cast<double>(M) / 2.0);
    const double d = static_cast<double>(data.ball.dimension);
    rep.formula = hard_lipschitz_formula(d, data.ball.radius, data.lipschitz, static_cast<double>(T));

    // For each ordered pair (a,b): the test set and which side is all-zero there.
    struct PairTest {
        std::vector<std::size_t> J;
        std::size_t zero_side;  // member that is 0 on J
        std::size_t other;
    };
    std::vector<PairTest> tests;
    for (std::size_t a = 0; a < M; ++a)
        for (std::size_t b = a + 1; b < M; ++b) {
            std::vector<std::size_t> ab, ba;  // a zero / b alpha, and the reverse
            for (std::size_t t = 0; t < T; ++t) {
                if (!book.vectors[a][t] && book.vectors[b][t]) ab.push_back(t);
                if (book.vectors[a][t] && !book.vectors[b][t]) ba.push_back(t);
            }
            if (ab.size() >= ba.size()) tests.push_back({std::move(ab), a, b});
            else tests.push_back({std::move(ba), b, a});
        }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, M - 1);
    std::bernoulli_distribution coin(data.alpha);
    std::vector<std::uint8_t> y(T);
    std::vector<std::size_t> wins(M);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        std::size_t truth = pick(rng);
        for (std::size_t t = 0; t < T; ++t) y[t] = book.vectors[truth][t] ? static_cast<std::uint8_t>(coin(rng)) : 0;
        std::fill(wins.begin(), wins.end(), 0);
        for (const auto& test : tests) {
            bool all_zero = std::all_of(test.J.begin(), test.J.end(), [&](std::size_t t) { return y[t] == 0; });
            ++wins[all_zero ? test.zero_side : test.other];
        }
        std::size_t winner = M;
        for (std::size_t j = 0; j < M; ++j)
            if (wins[j] == M - 1) winner = j;
        if (winner != truth) ++rep.errors;
    }
    rep.trials = trials;
    rep.error_rate = trials ? static_cast<double>(rep.errors) / static_cast<double>(trials) : 0.0;
    double p = std::min(1.0, rep.analytic_bound);
    rep.std_error = trials ? std::sqrt(p * (1.0 - p) / static_cast<double>(trials)) : 0.0;
    rep.informative = M > 2 && rep.error_rate <= 0.5;
    return rep;
}

}  // namespace seqlog
