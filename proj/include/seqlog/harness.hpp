#pragma once

// Experiment runner: label adversaries, one-run experiments with their bound
// checks, bench matrices from a key=value config, and the summary CSV.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "seqlog/bounds.hpp"
#include "seqlog/covering.hpp"
#include "seqlog/experts.hpp"
#include "seqlog/loss.hpp"
#include "seqlog/predictors.hpp"
#include "seqlog/shtarkov.hpp"
#include "seqlog/transcript.hpp"

namespace seqlog {

// ---------------------------------------------------------------------------
// Adversaries

inline Labels greedy_labels(OnlinePredictor& predictor, const Features& xs) {
    Labels ys;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        double p = predictor.predict(std::span<const Feature>(xs).first(t + 1));
        Label y = p <= 0.5 ? Label::one() : Label::zero();
        predictor.update(y);
        ys.push_back(y);
    }
    return ys;
}

struct WorstCaseResult {
    Labels labels;
    double regret = 0.0;
    bool exhaustive = true;
    std::string warning;
};

inline constexpr std::size_t kWorstCaseCap = 18;

using BestLossFn = std::function<double(const Features&, const Labels&)>;

inline BestLossFn hindsight_loss(const ExpertFamily& family) {
    return [&family](const Features& xs, const Labels& ys) { return best_in_hindsight(family, xs, ys).loss; };
}

// Full label-tree search against the concrete predictor: maximises realised
// regret over all 2^T sequences. Above the cap falls back to greedy labels.
inline WorstCaseResult worst_case_labels(const OnlinePredictor& predictor, const BestLossFn& best_loss, const Features& xs,
                                         std::size_t cap = kWorstCaseCap) {
    const std::size_t T = xs.size();
    WorstCaseResult out;
    if (T > cap) {
        auto p = predictor.clone();
        out.labels = greedy_labels(*p, xs);
        auto q = predictor.clone();
        out.regret = run_online(*q, xs, out.labels).cumulative_loss - best_loss(xs, out.labels);
        out.exhaustive = false;
        out.warning = "horizon " + std::to_string(T) + " exceeds the worst-case cap " + std::to_string(cap) + "; used greedy labels";
        return out;
    }
    out.regret = kNegInf;
    Labels ys;
    std::function<void(const OnlinePredictor&, double)> dfs = [&](const OnlinePredictor& state, double loss) {
        const std::size_t t = ys.size();
        if (t == T) {
            double r = loss - best_loss(xs, ys);
            if (r > out.regret) {
                out.regret = r;
                out.labels = ys;
            }
            return;
        }
        auto probe = state.clone();
        double p = probe->predict(std::span<const Feature>(xs).first(t + 1));
        for (int y : {0, 1}) {
            auto next = y == 0 ? state.clone() : std::move(probe);
            if (y == 0) next->predict(std::span<const Feature>(xs).first(t + 1));
            next->update(Label(y));
            ys.push_back(Label(y));
            dfs(*next, loss + detail::log_loss(p, y));
            ys.pop_back();
        }
    };
    dfs(predictor, 0.0);
    return out;
}

inline Labels iid_labels(std::size_t T, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(p);
    Labels ys;
    for (std::size_t t = 0; t < T; ++t) ys.push_back(Label(coin(rng) ? 1 : 0));
    return ys;
}

// y_t = 1{h(x^t) >= 1/2}, each label flipped with probability `noise`.
inline Labels realizable_labels(const ExpertFamily& family, std::span<const double> params, const Features& xs, double noise,
                                std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution flip(noise);
    Labels ys;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        int y = family.eval_params(params, std::span<const Feature>(xs).first(t + 1)) >= 0.5 ? 1 : 0;
        if (noise > 0 && flip(rng)) y = 1 - y;
        ys.push_back(Label(y));
    }
    return ys;
}

// Whitespace/comma separated 0/1 values; '#' starts a comment line.
inline Labels read_labels(std::istream& in) {
    Labels ys;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream ss(line);
        int v;
        while (ss >> v) ys.push_back(Label(v));
    }
    return ys;
}

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
    std::string family = "logistic";      // logistic | bernoulli | finite
    std::string predictor = "truncated_bayes";  // truncated_bayes | bayes | continuous_bayes | nml | constant | msoa
    std::string adversary = "greedy";     // greedy | iid | worst | realizable | file
    std::string design = "block";         // block | random
    std::size_t T = 32;
    std::size_t d = 1;
    double R = 1.0;
    double L = 1.0;
    double norm = 2.0;                    // parameter ball order s
    std::optional<double> alpha;          // truncation / cover scale
    std::optional<double> hessian;        // Hessian bound for continuous_bayes
    double iid_p = 0.7;
    double noise = 0.0;
    double constant = 0.5;
    std::size_t experts = 4;              // random finite families
    std::size_t domain = 3;
    std::string experts_file;
    std::string labels_file;
    std::string transcript;               // transcript CSV path, empty = none
    std::uint64_t seed = 1;

    // Canonical key=value text; the digest and the bench overrides use these keys.
    std::map<std::string, std::string> fields() const {
        std::map<std::string, std::string> f;
        f["family"] = family;
        f["predictor"] = predictor;
        f["adversary"] = adversary;
        f["design"] = design;
        f["T"] = std::to_string(T);
        f["d"] = std::to_string(d);
        f["R"] = format_double(R);
        f["L"] = format_double(L);
        f["norm"] = format_double(norm);
        f["alpha"] = alpha ? format_double(*alpha) : "";
        f["hessian"] = hessian ? format_double(*hessian) : "";
        f["iid_p"] = format_double(iid_p);
        f["noise"] = format_double(noise);
        f["constant"] = format_double(constant);
        f["experts"] = std::to_string(experts);
        f["domain"] = std::to_string(domain);
        f["experts_file"] = experts_file;
        f["labels_file"] = labels_file;
        f["seed"] = std::to_string(seed);
        return f;
    }

    void set(const std::string& key, const std::string& value) {
        auto u = [&]() { return static_cast<std::size_t>(std::stoull(value)); };
        if (key == "family") family = value;
        else if (key == "predictor") predictor = value;
        else if (key == "adversary") adversary = value;
        else if (key == "design") design = value;
        else if (key == "T") T = u();
        else if (key == "d") d = u();
        else if (key == "R") R = parse_double(value);
        else if (key == "L") L = parse_double(value);
        else if (key == "norm") norm = parse_double(value);
        else if (key == "alpha") alpha = value.empty() ? std::nullopt : std::optional<double>(parse_double(value));
        else if (key == "hessian") hessian = value.empty() ? std::nullopt : std::optional<double>(parse_double(value));
        else if (key == "iid_p") iid_p = parse_double(value);
        else if (key == "noise") noise = parse_double(value);
        else if (key == "constant") constant = parse_double(value);
        else if (key == "experts") experts = u();
        else if (key == "domain") domain = u();
        else if (key == "experts_file") experts_file = value;
        else if (key == "labels_file") labels_file = value;
        else if (key == "transcript") transcript = value;
        else if (key == "seed") seed = std::stoull(value);
        else throw std::invalid_argument("unknown experiment key '" + key + "'");
    }
};

inline std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_digest(const ExperimentConfig& cfg) {
    std::string canon;
    for (const auto& [k, v] : cfg.fields()) canon += k + "=" + v + ";";
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << fnv1a(canon);
    return ss.str();
}

struct ReportRow {
    std::string digest;
    ExperimentConfig config;
    std::size_t horizon = 0;  // after any design trimming
    double alpha = 0.0;       // 0 when unused
    double learner_loss = 0.0;
    double best_loss = 0.0;
    double regret = 0.0;
    std::string bound_kind = "none";
    double bound = kInf;
    double slack = kInf;
    double allowance = 0.0;   // slack >= -allowance passes
    bool ok = true;
    double wall_seconds = 0.0;  // kept out of the summary CSV
    std::string note;
};

struct ExperimentResult {
    ReportRow row;
    Transcript transcript;
};

// ---------------------------------------------------------------------------
// Running one experiment

namespace detail {

inline ExpertFamily make_family(const ExperimentConfig& cfg) {
    if (cfg.family == "logistic") {
        return ExpertFamily::logistic(cfg.d, cfg.R, cfg.L, cfg.norm);
    }
    if (cfg.family == "bernoulli") return ExpertFamily::constant_bernoulli();
    if (cfg.family == "finite") {
        if (!cfg.experts_file.empty()) {
            std::ifstream in(cfg.experts_file);
            if (!in) throw std::runtime_error("cannot open experts file '" + cfg.experts_file + "'");
            return family_from_table(read_expert_table(in));
        }
        std::mt19937_64 rng(cfg.seed ^ 0x5eed'f00dULL);
        return random_finite_static(cfg.experts, cfg.domain, rng);
    }
    throw std::invalid_argument("unknown family '" + cfg.family + "'");
}

inline Features make_design(const ExperimentConfig& cfg, const ExpertFamily& family, std::size_t& T) {
    Features xs;
    if (family.is_finite()) {
        std::size_t n = family.kind() == FamilyKind::FiniteStatic ? family.domain_size() : cfg.domain;
        std::mt19937_64 rng(cfg.seed ^ 0xde5'19ULL);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (std::size_t t = 0; t < T; ++t) xs.push_back({static_cast<double>(cfg.design == "block" ? (t * n) / T : pick(rng))});
        return xs;
    }
    if (family.kind() == FamilyKind::LipschitzParametric && family.dimension() == 1 && cfg.family == "bernoulli") {
        for (std::size_t t = 0; t < T; ++t) xs.push_back({1.0});
        return xs;
    }
    if (cfg.design == "block") {
        auto design = block_design_features(cfg.d, T);
        T = design.horizon;
        return design.features;
    }
    if (cfg.design == "random") {
        std::mt19937_64 rng(cfg.seed ^ 0xde5'19ULL);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (std::size_t t = 0; t < T; ++t) {
            Feature x(cfg.d);
            double n = 0.0;
            do {
                for (double& v : x) v = gauss(rng);
                n = lp_norm(x, 2.0);
            } while (n == 0.0);
            for (double& v : x) v /= n;
            xs.push_back(std::move(x));
        }
        return xs;
    }
    throw std::invalid_argument("unknown design '" + cfg.design + "'");
}

inline double max_feature_norm(const Features& xs) {
    double m = 0.0;
    for (const auto& x : xs) m = std::max(m, lp_norm(x, 2.0));
    return m;
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult res;
    ReportRow& row = res.row;
    row.config = cfg;
    row.digest = config_digest(cfg);
    try {
        if (cfg.T == 0) throw std::invalid_argument("T must be positive");
        ExpertFamily family = detail::make_family(cfg);
        std::size_t T = cfg.T;
        Features xs = detail::make_design(cfg, family, T);
        row.horizon = T;
        if (T != cfg.T) row.note = "horizon trimmed to " + std::to_string(T);
        const double dd = static_cast<double>(family.is_finite() ? 1 : family.dimension());

        if (cfg.predictor == "msoa") {
            if (family.kind() != FamilyKind::FiniteStatic) throw std::invalid_argument("msoa needs a finite static family");
            const double a = cfg.alpha.value_or(0.25);
            auto disc = discretize(family, a);
            auto fat = fat1_number(disc);
            std::mt19937_64 rng(cfg.seed);
            std::size_t h = std::uniform_int_distribution<std::size_t>(0, disc.table.size() - 1)(rng);
            std::vector<std::size_t> idx;
            std::vector<int> levels;
            for (const auto& x : xs) {
                idx.push_back(static_cast<std::size_t>(x[0]));
                levels.push_back(disc.table[h][idx.back()]);
            }
            auto run = msoa_run(disc, idx, levels, true);
            row.alpha = a;
            row.learner_loss = static_cast<double>(run.errors);
            row.best_loss = 0.0;
            row.regret = static_cast<double>(run.errors);
            row.bound_kind = "fat1";
            row.bound = fat.value;
            row.slack = row.bound - row.regret;
            row.ok = row.slack >= 0.0;
            row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            return res;
        }

        std::unique_ptr<OnlinePredictor> predictor;
        if (cfg.predictor == "truncated_bayes") {
            if (family.is_finite()) {
                const double a = cfg.alpha.value_or(0.1);
                auto cover = value_grid_cover(family, a);
                predictor = std::make_unique<MixturePredictor>(cover.pool(), a);
                row.alpha = a;
                row.bound_kind = to_string(BoundKind::CoverUpper);
                row.bound = evaluate_bound(BoundSpec{BoundKind::CoverUpper, {{"T", double(T)}, {"alpha", a}, {"cover_size", double(cover.size())}}});
            } else {
                const double a = cfg.alpha.value_or(std::min(0.5, dd / static_cast<double>(T)));
                auto cover = grid_cover(family, a);
                predictor = std::make_unique<MixturePredictor>(cover.pool(), a);
                row.alpha = a;
                row.bound_kind = to_string(BoundKind::LipschitzUpper);
                row.bound = evaluate_bound(BoundSpec{BoundKind::LipschitzUpper,
                                                     {{"T", double(T)}, {"d", dd}, {"R", family.ball().radius}, {"L", family.lipschitz_constant()}}});
                row.note += (row.note.empty() ? "" : "; ") + std::string("cover_size=") + std::to_string(cover.size());
            }
        } else if (cfg.predictor == "bayes") {
            if (!family.is_finite()) throw std::invalid_argument("bayes needs a finite family (use continuous_bayes)");
            predictor = std::make_unique<MixturePredictor>(pool_from_family(family));
            row.bound_kind = "log_size";
            row.bound = std::log(static_cast<double>(family.size()));
        } else if (cfg.predictor == "continuous_bayes") {
            ContinuousBayesOptions opts;
            opts.horizon = T;
            double C = cfg.hessian.value_or(0.25 * std::pow(detail::max_feature_norm(xs), 2.0));
            opts.hessian_bound = C;
            opts.probe_features = xs.size() > 64 ? Features(xs.begin(), xs.begin() + 64) : xs;
            opts.seed = cfg.seed;
            auto [mix, info] = continuous_bayes(family, opts);
            predictor = std::make_unique<MixturePredictor>(std::move(mix));
            row.bound_kind = to_string(BoundKind::HessianUpper);
            row.bound = evaluate_bound(BoundSpec{BoundKind::HessianUpper, {{"T", double(T)}, {"d", dd}, {"R", family.ball().radius}, {"C", C}}});
            row.allowance = 0.1;
            row.note += (row.note.empty() ? "" : "; ") + std::string("grid_points=") + std::to_string(info.grid_points);
        } else if (cfg.predictor == "nml") {
            if (!family.is_finite()) throw std::invalid_argument("nml needs a finite family");
            auto oracle = SupOracle::finite_max(family);
            auto table = std::make_shared<const GameValueTable>(minimax_value(oracle, xs));
            predictor = std::make_unique<NmlPredictor>(table);
            row.bound_kind = "shtarkov";
            row.bound = table->root();
            row.allowance = 1e-9;
        } else if (cfg.predictor == "constant") {
            predictor = std::make_unique<ConstantPredictor>(cfg.constant);
        } else {
            throw std::invalid_argument("unknown predictor '" + cfg.predictor + "'");
        }
        if (row.allowance == 0.0 && std::isfinite(row.bound)) row.allowance = 1e-9;

        Labels ys;
        if (cfg.adversary == "greedy") {
            auto probe = predictor->clone();
            ys = greedy_labels(*probe, xs);
        } else if (cfg.adversary == "iid") {
            ys = iid_labels(T, cfg.iid_p, cfg.seed);
        } else if (cfg.adversary == "worst") {
            auto wc = worst_case_labels(*predictor, hindsight_loss(family), xs);
            ys = wc.labels;
            if (!wc.warning.empty()) row.note += (row.note.empty() ? "" : "; ") + wc.warning;
        } else if (cfg.adversary == "realizable") {
            std::vector<double> params;
            std::mt19937_64 rng(cfg.seed);
            if (family.is_finite()) {
                params = {static_cast<double>(std::uniform_int_distribution<std::size_t>(0, family.size() - 1)(rng))};
            } else {
                std::uniform_real_distribution<double> unif(-1.0, 1.0);
                params.assign(family.dimension(), 0.0);
                for (double& v : params) v = unif(rng) * family.ball().radius / std::sqrt(static_cast<double>(params.size()));
            }
            ys = realizable_labels(family, params, xs, cfg.noise, cfg.seed + 1);
        } else if (cfg.adversary == "file") {
            std::ifstream in(cfg.labels_file);
            if (!in) throw std::runtime_error("cannot open labels file '" + cfg.labels_file + "'");
            ys = read_labels(in);
            if (ys.size() < T) throw std::invalid_argument("labels file shorter than T");
            ys.resize(T);
        } else {
            throw std::invalid_argument("unknown adversary '" + cfg.adversary + "'");
        }

        res.transcript = run_online(*predictor, xs, ys);
        auto best = best_in_hindsight(family, xs, ys);
        res.transcript.best = best;
        row.learner_loss = res.transcript.cumulative_loss;
        row.best_loss = best.loss;
        row.regret = pointwise_regret(row.learner_loss, row.best_loss);
        if (std::isfinite(row.bound)) {
            row.slack = row.bound - row.regret;
            row.ok = row.slack >= -row.allowance;
        }
        if (!cfg.transcript.empty()) {
            std::ofstream out(cfg.transcript);
            if (!out) throw std::runtime_error("cannot write transcript '" + cfg.transcript + "'");
            write_transcript_csv(out, res.transcript);
        }
    } catch (const std::exception& e) {
        throw std::runtime_error("experiment " + row.digest + ": " + e.what());
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

// ---------------------------------------------------------------------------
// Bench configuration
//
//   [experiment]
//   family = logistic
//   predictor = truncated_bayes
//   seed = 7
//
//   [axis.T]
//   values = 32, 128, 512
//
// Every combination of axis values (first axis outermost) is one cell.

struct BenchConfig {
    std::map<std::string, std::string> base;
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
};

inline std::string trim(std::string s) {
    auto notspace = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
    s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
    return s;
}

inline BenchConfig parse_bench_config(std::istream& in) {
    BenchConfig cfg;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw std::runtime_error("bench config line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "experiment" && section.rfind("axis.", 0) != 0)
                throw std::runtime_error("bench config line " + std::to_string(lineno) + ": unknown section '" + section + "'");
            if (section.rfind("axis.", 0) == 0) cfg.axes.push_back({section.substr(5), {}});
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("bench config line " + std::to_string(lineno) + ": expected key = value");
        auto key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (section == "experiment") {
            cfg.base[key] = value;
        } else if (!section.empty()) {
            if (key != "values") throw std::runtime_error("bench config line " + std::to_string(lineno) + ": axis sections take 'values'");
            for (auto& v : split(value, ',')) {
                auto t = trim(v);
                if (!t.empty()) cfg.axes.back().second.push_back(t);
            }
        } else {
            throw std::runtime_error("bench config line " + std::to_string(lineno) + ": key outside a section");
        }
    }
    for (const auto& [name, values] : cfg.axes)
        if (values.empty()) throw std::runtime_error("axis '" + name + "' has no values");
    return cfg;
}

inline std::vector<ExperimentConfig> expand_bench(const BenchConfig& bench) {
    ExperimentConfig base;
    for (const auto& [k, v] : bench.base) base.set(k, v);
    std::vector<ExperimentConfig> cells{base};
    for (const auto& [key, values] : bench.axes) {
        std::vector<ExperimentConfig> next;
        for (const auto& cell : cells)
            for (const auto& v : values) {
                auto c = cell;
                c.set(key, v);
                next.push_back(std::move(c));
            }
        cells = std::move(next);
    }
    return cells;
}

inline void write_summary_header(std::ostream& out) {
    out << kSchemaLine << '\n'
        << "digest,family,predictor,adversary,design,d,T,alpha,seed,learner_loss,best_loss,regret,bound_kind,bound,slack,ok\n";
}

inline void write_summary_row(std::ostream& out, const ReportRow& r) {
    const auto& c = r.config;
    out << r.digest << ',' << c.family << ',' << c.predictor << ',' << c.adversary << ',' << c.design << ',' << c.d << ','
        << r.horizon << ',' << format_double(r.alpha) << ',' << c.seed << ',' << format_double(r.learner_loss) << ','
        << format_double(r.best_loss) << ',' << format_double(r.regret) << ',' << r.bound_kind << ',' << format_double(r.bound)
        << ',' << format_double(r.slack) << ',' << (r.ok ? 1 : 0) << '\n';
}

struct BenchOutcome {
    std::vector<ReportRow> rows;
    bool all_ok = true;
};

// Runs every cell; rows come out in cell order. `timing` (optional) receives
// digest,wall_seconds lines.
inline BenchOutcome run_bench(const BenchConfig& bench, std::ostream& summary, std::ostream* timing = nullptr) {
    BenchOutcome out;
    write_summary_header(summary);
    if (timing) *timing << "digest,wall_seconds\n";
    for (const auto& cell : expand_bench(bench)) {
        auto res = run_experiment(cell);
        write_summary_row(summary, res.row);
        if (timing) *timing << res.row.digest << ',' << format_double(res.row.wall_seconds) << '\n';
        out.all_ok = out.all_ok && res.row.ok;
        out.rows.push_back(std::move(res.row));
    }
    return out;
}

}  // namespace seqlog
