#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seqlog/seqlog.hpp"

namespace {

using namespace seqlog;

const std::vector<std::string> kExperimentKeys = {
    "family", "predictor", "adversary", "design", "T", "d", "R", "L", "norm", "alpha", "hessian", "iid_p", "noise",
    "constant", "experts", "domain", "experts_file", "labels_file", "transcript", "seed"};

const std::vector<std::string> kBoundKeys = {"T",     "d",         "R",    "L",   "C",            "s",          "c",
                                             "alpha", "cover_size", "log_cover_size", "dfat", "cap", "box_side", "volume_ratio"};

std::string cli_flag(const std::string& key) {
    std::string f = "--" + key;
    for (char& c : f)
        if (c == '_') c = '-';
    return f;
}

ExpertFamily load_family(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open experts file '" + path + "'");
    return family_from_table(read_expert_table(in));
}

std::ostream& open_or_stdout(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path);
    if (!file) throw std::runtime_error("cannot write '" + path + "'");
    return file;
}

int run_predict(const std::map<std::string, std::string>& values) {
    ExperimentConfig cfg;
    for (const auto& [k, v] : values) cfg.set(k, v);
    auto res = run_experiment(cfg);
    write_summary_header(std::cout);
    write_summary_row(std::cout, res.row);
    if (!res.row.note.empty()) std::cerr << "note: " << res.row.note << '\n';
    return res.row.ok ? 0 : 1;
}

struct ShtarkovArgs {
    std::string oracle = "bernoulli";
    std::size_t T = 10;
    std::size_t d = 2;
    double s = 1.0;
    double c = 1.0;
    std::string link = "logistic";
    std::string interval = "0,1";
    std::string experts;
};

int run_shtarkov(const ShtarkovArgs& a) {
    std::ostringstream params;
    params << "T=" << a.T;
    double ln_s = 0.0;
    std::optional<double> formula;
    bool lower = true;
    if (a.oracle == "bernoulli") {
        ln_s = shtarkov_sum(SupOracle::constant_bernoulli(), a.T);
        formula = std::log(static_cast<double>(a.T) + 1.0);
        lower = false;
    } else if (a.oracle == "interval") {
        auto parts = split(a.interval, ',');
        if (parts.size() != 2) throw std::invalid_argument("--interval expects lo,hi");
        double lo = parse_double(parts[0]), hi = parse_double(parts[1]);
        params << ";interval=" << format_double(lo) << ':' << format_double(hi);
        ln_s = shtarkov_sum(SupOracle::interval_bernoulli(lo, hi), a.T);
        formula = std::log(static_cast<double>(a.T) + 1.0);
        lower = false;
    } else if (a.oracle == "ds") {
        params << ";s=" << format_double(a.s);
        ln_s = shtarkov_sum(SupOracle::ds_closed_form(a.s), a.T);
        formula = ds_formula(static_cast<double>(a.T), a.s);
    } else if (a.oracle == "block") {
        if (a.link != "logistic") throw std::invalid_argument("--link supports 'logistic'");
        params << ";d=" << a.d << ";s=" << format_double(a.s) << ";link=" << a.link << ";c=" << format_double(a.c);
        ln_s = block_shtarkov_lower(a.d, a.T, LinkFunction::logistic(), a.s);
        formula = block_leading_term(static_cast<double>(a.d), static_cast<double>(a.T), a.s) - a.c * static_cast<double>(a.d);
    } else if (a.oracle == "finite") {
        if (a.experts.empty()) throw std::invalid_argument("--oracle finite needs --experts");
        auto fam = load_family(a.experts);
        std::size_t n = fam.kind() == FamilyKind::FiniteStatic ? fam.domain_size() : 1;
        Features xs;
        for (std::size_t t = 0; t < a.T; ++t) xs.push_back({static_cast<double>((t * n) / a.T)});
        params << ";experts=" << fam.size();
        ln_s = shtarkov_sum(SupOracle::finite_max(fam), xs);
        formula = std::log(static_cast<double>(fam.size()));
        lower = false;
    } else {
        throw std::invalid_argument("unknown oracle '" + a.oracle + "'");
    }
    std::string verdict = "n/a";
    if (formula) verdict = (lower ? ln_s >= *formula - 1e-12 : ln_s <= *formula + 1e-12) ? "holds" : "violated";
    std::cout << "oracle,params,ln_S,formula_bound,verdict\n"
              << a.oracle << ',' << params.str() << ',' << format_double(ln_s) << ','
              << (formula ? format_double(*formula) : std::string("")) << ',' << verdict << '\n';
    return verdict == "violated" ? 1 : 0;
}

int run_bound(const std::string& kind, const std::map<std::string, std::string>& values) {
    BoundSpec spec{parse_bound_kind(kind), {}};
    for (const auto& [k, v] : values) spec.set(k, parse_double(v));
    double value = evaluate_bound(spec);
    std::cout << "kind";
    for (const auto& [k, v] : spec.params) std::cout << ',' << k;
    std::cout << ",value\n" << kind;
    for (const auto& [k, v] : spec.params) std::cout << ',' << format_double(v);
    std::cout << ',' << format_double(value) << '\n';
    return 0;
}

struct CoverArgs {
    std::string experts;
    std::string method = "values";
    double alpha = 0.1;
    std::size_t T = 0;
    int depth_cap = kDefaultDepthCap;
    std::size_t size_cap = kDefaultMsoaCoverCap;
    std::string out;
};

int run_cover(const CoverArgs& a) {
    auto fam = load_family(a.experts);
    if (fam.kind() != FamilyKind::FiniteStatic) throw std::invalid_argument("cover needs a finite static expert table");
    std::ofstream file;
    std::ostream& out = open_or_stdout(a.out, file);
    if (a.method == "values") {
        auto cover = value_grid_cover(fam, a.alpha);
        write_expert_table(out, cover_table(cover, fam.domain_size()));
        std::cerr << "cover=values alpha=" << format_double(cover.alpha()) << " members=" << cover.size() << '\n';
    } else if (a.method == "msoa") {
        if (a.T == 0) throw std::invalid_argument("--method msoa needs --T");
        auto [cover, info] = msoa_cover(fam.table(), a.alpha, a.T, a.size_cap, a.depth_cap);
        write_expert_table(out, cover_table(cover, fam.domain_size(), a.T));
        std::cerr << "cover=msoa alpha=" << format_double(cover.alpha()) << " fat1=" << info.fat1 << " levels=" << info.levels
                  << " members=" << info.members << " size_bound="
                  << format_double(cover_size_bound(static_cast<double>(a.T), cover.alpha(), info.fat1)) << '\n';
    } else {
        throw std::invalid_argument("unknown cover method '" + a.method + "'");
    }
    return 0;
}

int run_bench_command(const std::string& config, const std::string& out_path, const std::string& timing_path) {
    std::ifstream in(config);
    if (!in) throw std::runtime_error("cannot open bench config '" + config + "'");
    auto bench = parse_bench_config(in);
    std::ofstream file, timing_file;
    std::ostream& out = open_or_stdout(out_path, file);
    std::ostream* timing = nullptr;
    if (!timing_path.empty()) {
        timing_file.open(timing_path);
        if (!timing_file) throw std::runtime_error("cannot write '" + timing_path + "'");
        timing = &timing_file;
    }
    auto outcome = run_bench(bench, out, timing);
    std::size_t failed = 0;
    for (const auto& row : outcome.rows)
        if (!row.ok) {
            ++failed;
            std::cerr << "slack violated: " << row.digest << " regret=" << format_double(row.regret)
                      << " bound=" << format_double(row.bound) << '\n';
        }
    std::cerr << outcome.rows.size() << " cells, " << failed << " failed\n";
    return outcome.all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential probability assignment under log loss"};
    app.require_subcommand(1);

    auto* predict = app.add_subcommand("predict", "Run one experiment and print its summary row");
    std::map<std::string, std::string> predict_values;
    for (const auto& key : kExperimentKeys)
        predict->add_option_function<std::string>(cli_flag(key), [&, key](const std::string& v) { predict_values[key] = v; },
                                                   "experiment key '" + key + "'");

    auto* shtarkov = app.add_subcommand("shtarkov", "Log Shtarkov sum of a family against its formula");
    ShtarkovArgs sa;
    shtarkov->add_option("--oracle", sa.oracle, "bernoulli | interval | ds | block | finite")->capture_default_str();
    shtarkov->add_option("--T", sa.T, "horizon")->required();
    shtarkov->add_option("--d", sa.d, "blocks (block oracle)")->capture_default_str();
    shtarkov->add_option("--s", sa.s, "norm order (ds, block)")->capture_default_str();
    shtarkov->add_option("--c", sa.c, "constant in the block formula")->capture_default_str();
    shtarkov->add_option("--link", sa.link, "link function (block)")->capture_default_str();
    shtarkov->add_option("--interval", sa.interval, "lo,hi (interval)")->capture_default_str();
    shtarkov->add_option("--experts", sa.experts, "expert table (finite)");

    auto* bound = app.add_subcommand("bound", "Evaluate a closed-form regret bound");
    std::string bound_kind;
    std::map<std::string, std::string> bound_values;
    bound->add_option("--kind", bound_kind, "cover | lipschitz | lipschitz_lower | hessian | hessian_volume | link_lower | ds_lower | cover_size")
        ->required();
    for (const auto& key : kBoundKeys)
        bound->add_option_function<std::string>(cli_flag(key), [&, key](const std::string& v) { bound_values[key] = v; },
                                                "parameter '" + key + "'");

    auto* cover = app.add_subcommand("cover", "Build a cover of a finite expert table");
    CoverArgs ca;
    cover->add_option("--experts", ca.experts, "expert table")->required();
    cover->add_option("--method", ca.method, "values | msoa")->capture_default_str();
    cover->add_option("--alpha", ca.alpha, "scale")->capture_default_str();
    cover->add_option("--T", ca.T, "horizon (msoa)");
    cover->add_option("--depth-cap", ca.depth_cap, "shattering depth cap")->capture_default_str();
    cover->add_option("--size-cap", ca.size_cap, "maximum cover members")->capture_default_str();
    cover->add_option("--out", ca.out, "output table (default stdout)");

    auto* bench = app.add_subcommand("bench", "Run a benchmark matrix from a config file");
    std::string bench_config, bench_out, bench_timing;
    bench->add_option("config", bench_config, "bench config")->required();
    bench->add_option("--out", bench_out, "summary CSV (default stdout)");
    bench->add_option("--timing", bench_timing, "wall-time CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*predict) return run_predict(predict_values);
        if (*shtarkov) return run_shtarkov(sa);
        if (*bound) return run_bound(bound_kind, bound_values);
        if (*cover) return run_cover(ca);
        if (*bench) return run_bench_command(bench_config, bench_out, bench_timing);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
