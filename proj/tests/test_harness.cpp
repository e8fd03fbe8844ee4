#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "seqlog/harness.hpp"

namespace seqlog {
namespace {

Features index_features(std::size_t T, std::size_t n) {
    Features xs;
    for (std::size_t t = 0; t < T; ++t) xs.push_back({static_cast<double>(t % n)});
    return xs;
}

double realised_regret(const OnlinePredictor& pred, const ExpertFamily& fam, const Features& xs, const Labels& ys) {
    auto p = pred.clone();
    return run_online(*p, xs, ys).cumulative_loss - best_in_hindsight(fam, xs, ys).loss;
}

TEST(Adversary, GreedyAgainstConstants) {
    Features xs = index_features(6, 1);
    ConstantPredictor half(0.5);
    for (auto y : greedy_labels(half, xs)) EXPECT_EQ(y.value(), 1);
    ConstantPredictor high(0.7);
    for (auto y : greedy_labels(high, xs)) EXPECT_EQ(y.value(), 0);
}

TEST(Adversary, WorstCaseMatchesBruteForce) {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 3; ++rep) {
        auto fam = random_finite_static(4, 3, rng);
        const std::size_t T = 8;
        Features xs = index_features(T, 3);
        MixturePredictor pred(pool_from_family(fam));
        auto wc = worst_case_labels(pred, hindsight_loss(fam), xs);
        EXPECT_TRUE(wc.exhaustive);
        double brute = kNegInf;
        for (std::uint64_t bits = 0; bits < (1u << T); ++bits)
            brute = std::max(brute, realised_regret(pred, fam, xs, labels_from_bits(bits, T)));
        EXPECT_NEAR(wc.regret, brute, 1e-9);
        EXPECT_NEAR(realised_regret(pred, fam, xs, wc.labels), wc.regret, 1e-9);

        auto probe = pred.clone();
        auto g = greedy_labels(*probe, xs);
        EXPECT_LE(realised_regret(pred, fam, xs, g), wc.regret + 1e-12);
    }
}

TEST(Adversary, NmlIsAnEqualizer) {
    std::mt19937_64 rng(5);
    auto fam = random_finite_static(3, 2, rng);
    const std::size_t T = 7;
    Features xs = index_features(T, 2);
    auto oracle = SupOracle::finite_max(fam);
    auto table = std::make_shared<const GameValueTable>(minimax_value(oracle, xs));
    NmlPredictor nml(table);
    auto wc = worst_case_labels(nml, hindsight_loss(fam), xs);
    EXPECT_NEAR(wc.regret, table->root(), 1e-9);
    for (std::uint64_t bits = 0; bits < (1u << T); ++bits)
        EXPECT_NEAR(realised_regret(nml, fam, xs, labels_from_bits(bits, T)), table->root(), 1e-9);
}

TEST(Adversary, WorstCaseFallsBackAboveCap) {
    auto fam = ExpertFamily::constants({0.2, 0.8});
    Features xs = index_features(10, 1);
    MixturePredictor pred(pool_from_family(fam));
    auto wc = worst_case_labels(pred, hindsight_loss(fam), xs, 6);
    EXPECT_FALSE(wc.exhaustive);
    EXPECT_NE(wc.warning.find("cap"), std::string::npos);
    EXPECT_EQ(wc.labels.size(), 10u);
}

TEST(Adversary, IidLabelsDeterministicWithRate) {
    auto a = iid_labels(20000, 0.3, 9), b = iid_labels(20000, 0.3, 9);
    EXPECT_EQ(a, b);
    double ones = 0;
    for (auto y : a) ones += y.value();
    EXPECT_NEAR(ones / 20000, 0.3, 0.02);
}

TEST(Adversary, RealizableLabelsFollowThreshold) {
    auto fam = ExpertFamily::logistic(2, 1.0, 1.0);
    auto design = block_design_features(2, 16);
    std::vector<double> w = {0.6, -0.3};
    auto ys = realizable_labels(fam, w, design.features, 0.0, 3);
    for (std::size_t t = 0; t < ys.size(); ++t) {
        double h = fam.eval_params(w, std::span<const Feature>(design.features).first(t + 1));
        EXPECT_EQ(ys[t].value(), h >= 0.5 ? 1 : 0);
    }
    auto flipped = realizable_labels(fam, w, design.features, 1.0, 3);
    for (std::size_t t = 0; t < ys.size(); ++t) EXPECT_NE(ys[t], flipped[t]);
}

TEST(Adversary, ReadLabels) {
    std::istringstream in("# header\n0 1,1\n\n1\n");
    auto ys = read_labels(in);
    ASSERT_EQ(ys.size(), 4u);
    EXPECT_EQ(ys[0].value(), 0);
    EXPECT_EQ(ys[3].value(), 1);
    std::istringstream bad("0 2\n");
    EXPECT_THROW(read_labels(bad), std::invalid_argument);
}

TEST(Config, SetAndFields) {
    ExperimentConfig c;
    c.set("T", "64");
    c.set("alpha", "0.125");
    c.set("family", "finite");
    EXPECT_EQ(c.T, 64u);
    EXPECT_EQ(*c.alpha, 0.125);
    EXPECT_EQ(c.fields().at("family"), "finite");
    c.set("alpha", "");
    EXPECT_FALSE(c.alpha.has_value());
    EXPECT_THROW(c.set("colour", "red"), std::invalid_argument);
}

TEST(Config, DigestDeterministic) {
    ExperimentConfig a, b;
    EXPECT_EQ(config_digest(a), config_digest(b));
    EXPECT_EQ(config_digest(a).size(), 16u);
    b.seed = 2;
    EXPECT_NE(config_digest(a), config_digest(b));
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Bench, ParseAndExpand) {
    std::istringstream in(
        "# demo\n"
        "[experiment]\n"
        "family = finite  # inline comment\n"
        "predictor = bayes\n"
        "[axis.T]\n"
        "values = 4, 8\n"
        "[axis.seed]\n"
        "values = 1,2,3\n");
    auto bench = parse_bench_config(in);
    EXPECT_EQ(bench.base.at("family"), "finite");
    ASSERT_EQ(bench.axes.size(), 2u);
    auto cells = expand_bench(bench);
    ASSERT_EQ(cells.size(), 6u);
    EXPECT_EQ(cells[0].T, 4u);
    EXPECT_EQ(cells[0].seed, 1u);
    EXPECT_EQ(cells[1].seed, 2u);
    EXPECT_EQ(cells[3].T, 8u);
    EXPECT_EQ(cells[5].predictor, "bayes");
}

TEST(Bench, ParseErrors) {
    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return parse_bench_config(in);
    };
    EXPECT_THROW(parse("[weird]\n"), std::runtime_error);
    EXPECT_THROW(parse("T = 4\n"), std::runtime_error);
    EXPECT_THROW(parse("[axis.T]\nvalues = \n"), std::runtime_error);
    EXPECT_THROW(parse("[axis.T]\nlist = 1\n"), std::runtime_error);
    EXPECT_THROW(parse("[experiment\n"), std::runtime_error);
    EXPECT_THROW(parse("[experiment]\nno_equals\n"), std::runtime_error);
}

TEST(Bench, SummaryFormatAndDeterminism) {
    std::istringstream in(
        "[experiment]\nfamily = finite\nexperts = 3\ndomain = 2\nadversary = worst\n"
        "[axis.predictor]\nvalues = bayes, nml, truncated_bayes\n"
        "[axis.T]\nvalues = 6, 9\n");
    auto bench = parse_bench_config(in);
    std::ostringstream s1, s2, timing;
    auto r1 = run_bench(bench, s1, &timing);
    auto r2 = run_bench(bench, s2);
    EXPECT_EQ(s1.str(), s2.str());
    EXPECT_TRUE(r1.all_ok);
    ASSERT_EQ(r1.rows.size(), 6u);

    std::istringstream lines(s1.str());
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, kSchemaLine);
    std::getline(lines, line);
    EXPECT_EQ(split(line, ',').size(), 16u);
    std::size_t n = 0;
    while (std::getline(lines, line)) {
        EXPECT_EQ(split(line, ',').size(), 16u);
        EXPECT_EQ(line.back(), '1');
        ++n;
    }
    EXPECT_EQ(n, 6u);
    EXPECT_EQ(timing.str().rfind("digest,wall_seconds\n", 0), 0u);
}

TEST(Experiment, BayesRegretWithinLogSize) {
    ExperimentConfig c;
    c.family = "finite";
    c.predictor = "bayes";
    c.adversary = "worst";
    c.T = 10;
    c.experts = 5;
    c.domain = 3;
    auto res = run_experiment(c);
    EXPECT_EQ(res.row.bound_kind, "log_size");
    EXPECT_NEAR(res.row.bound, std::log(5.0), 1e-12);
    EXPECT_LE(res.row.regret, res.row.bound + 1e-9);
    EXPECT_TRUE(res.row.ok);
    EXPECT_EQ(res.transcript.labels.size(), 10u);
}

TEST(Experiment, TruncatedBayesLogistic) {
    ExperimentConfig c;
    c.family = "logistic";
    c.predictor = "truncated_bayes";
    c.d = 1;
    c.T = 16;
    auto res = run_experiment(c);
    EXPECT_EQ(res.row.bound_kind, "lipschitz");
    EXPECT_NEAR(res.row.alpha, 1.0 / 16.0, 1e-15);
    EXPECT_NEAR(res.row.bound, std::log(2.0 * 16 + 1) + 2.0, 1e-12);
    EXPECT_TRUE(res.row.ok);
    EXPECT_GE(res.row.regret, 0.0);
}

TEST(Experiment, ContinuousBayesLogistic) {
    ExperimentConfig c;
    c.family = "logistic";
    c.predictor = "continuous_bayes";
    c.d = 2;
    c.T = 32;
    auto res = run_experiment(c);
    EXPECT_EQ(res.row.bound_kind, "hessian");
    EXPECT_TRUE(res.row.ok) << res.row.regret << " vs " << res.row.bound;
}

TEST(Experiment, MsoaMistakesWithinFat1) {
    ExperimentConfig c;
    c.family = "finite";
    c.predictor = "msoa";
    c.T = 12;
    c.experts = 6;
    c.domain = 4;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        c.seed = seed;
        auto res = run_experiment(c);
        EXPECT_EQ(res.row.bound_kind, "fat1");
        EXPECT_TRUE(res.row.ok);
    }
}

TEST(Experiment, ConstantHasNoBound) {
    ExperimentConfig c;
    c.family = "bernoulli";
    c.predictor = "constant";
    c.adversary = "iid";
    c.T = 50;
    auto res = run_experiment(c);
    EXPECT_EQ(res.row.bound_kind, "none");
    EXPECT_TRUE(res.row.ok);
    EXPECT_NEAR(res.row.learner_loss, 50 * std::log(2.0), 1e-9);
}

TEST(Experiment, ErrorsCarryDigest) {
    ExperimentConfig c;
    c.predictor = "oracle_of_delphi";
    try {
        run_experiment(c);
        FAIL() << "expected an exception";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find(config_digest(c)), std::string::npos);
    }
}

TEST(Experiment, WritesTranscript) {
    auto path = std::filesystem::temp_directory_path() / "seqlog_harness_transcript.csv";
    ExperimentConfig c;
    c.family = "finite";
    c.predictor = "bayes";
    c.T = 6;
    c.transcript = path.string();
    auto res = run_experiment(c);
    std::ifstream in(path);
    auto back = read_transcript_csv(in);
    EXPECT_EQ(back.labels, res.transcript.labels);
    EXPECT_NEAR(back.cumulative_loss, res.transcript.cumulative_loss, 1e-12);
    std::filesystem::remove(path);
}

TEST(Experiment, FileAdversary) {
    auto path = std::filesystem::temp_directory_path() / "seqlog_harness_labels.txt";
    {
        std::ofstream out(path);
        out << "1 0 1 1 0 0 1 0\n";
    }
    ExperimentConfig c;
    c.family = "bernoulli";
    c.predictor = "constant";
    c.adversary = "file";
    c.labels_file = path.string();
    c.T = 8;
    auto res = run_experiment(c);
    EXPECT_EQ(res.transcript.labels, labels_from_ints(std::vector<int>{1, 0, 1, 1, 0, 0, 1, 0}));
    EXPECT_NEAR(res.row.best_loss, 8 * std::log(2.0), 1e-9);
    c.T = 9;
    EXPECT_THROW(run_experiment(c), std::runtime_error);
    std::filesystem::remove(path);
}

}  // namespace
}  // namespace seqlog
