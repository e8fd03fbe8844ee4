#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "seqlog/bounds.hpp"
#include "seqlog/covering.hpp"

namespace seqlog {
namespace {

using Table = std::vector<std::vector<double>>;

// Test-side shattering oracle: plain recursion over member lists, no memo,
// witnesses scanned over a fine grid of candidate levels.
int oracle_depth(const Table& tab, const std::vector<std::size_t>& live, double margin, const std::vector<double>& witnesses, int cap) {
    if (live.empty()) return -1;
    if (cap == 0) return 0;
    int best = 0;
    for (std::size_t x = 0; x < tab.front().size(); ++x) {
        std::set<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> seen;
        for (double s : witnesses) {
            std::vector<std::size_t> lo, hi;
            for (auto h : live) {
                if (tab[h][x] <= s - margin + 1e-12) lo.push_back(h);
                if (tab[h][x] >= s + margin - 1e-12) hi.push_back(h);
            }
            if (lo.empty() || hi.empty() || !seen.insert({lo, hi}).second) continue;
            best = std::max(best, 1 + std::min(oracle_depth(tab, lo, margin, witnesses, cap - 1),
                                               oracle_depth(tab, hi, margin, witnesses, cap - 1)));
        }
    }
    return best;
}

std::vector<std::size_t> everyone(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

Table all_functions(std::size_t domain, const std::vector<double>& values) {
    Table out{{}};
    for (std::size_t x = 0; x < domain; ++x) {
        Table next;
        for (const auto& row : out)
            for (double v : values) {
                auto r = row;
                r.push_back(v);
                next.push_back(r);
            }
        out = next;
    }
    return out;
}

TEST(GridCover, OneDimensionalHalf) {
    auto fam = ExpertFamily::logistic(1, 1.0, 1.0);
    auto cover = grid_cover(fam, 0.5);
    EXPECT_LE(cover.size(), 5u);
    EXPECT_STREQ(cover.provenance_name(), "grid");
}

TEST(GridCover, SizeWithinLatticeBound) {
    for (std::size_t d : {1u, 2u, 3u})
        for (double s : {1.0, 2.0, std::numeric_limits<double>::infinity()})
            for (double alpha : {0.05, 0.1, 0.3, 0.7})
                for (double R : {0.5, 1.0, 2.0}) {
                    auto fam = ExpertFamily::logistic(d, R, 1.0, s);
                    auto cover = grid_cover(fam, alpha);
                    EXPECT_LE(static_cast<double>(cover.size()), grid_cover_size_bound(R, 1.0, alpha, d))
                        << "d=" << d << " s=" << s << " alpha=" << alpha << " R=" << R;
                }
}

// Cover condition on random (w, x^T): some member stays within alpha at every step.
TEST(GridCover, CoversRandomExperts) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (std::size_t d : {1u, 2u})
        for (double s : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
            const double dual = s == 1.0 ? std::numeric_limits<double>::infinity() : (s == 2.0 ? 2.0 : 1.0);
            auto fam = ExpertFamily::logistic(d, 1.0, 0.25, s);
            const double alpha = 0.05;
            auto cover = grid_cover(fam, alpha);
            for (int trial = 0; trial < 200; ++trial) {
                std::vector<double> w(d);
                do {
                    for (double& c : w) c = unif(rng);
                } while (!fam.ball().contains(w));
                Features xs;
                for (int t = 0; t < 20; ++t) {
                    Feature x(d);
                    for (double& c : x) c = unif(rng);
                    double n = lp_norm(x, dual);
                    for (double& c : x) c /= std::max(1.0, n);
                    xs.push_back(x);
                }
                bool covered = false;
                for (std::size_t g = 0; g < cover.size() && !covered; ++g) {
                    bool ok = true;
                    for (std::size_t t = 0; t < xs.size() && ok; ++t) {
                        auto pre = std::span<const Feature>(xs).first(t + 1);
                        ok = std::abs(fam.eval_params(w, pre) - cover.eval(g, pre)) <= alpha + 1e-12;
                    }
                    covered = ok;
                }
                EXPECT_TRUE(covered) << "d=" << d << " s=" << s;
            }
        }
}

TEST(GridCover, LargeScaleIsSingleCentre) {
    auto fam = ExpertFamily::logistic(2, 1.0, 0.25);
    auto cover = grid_cover(fam, 0.6);
    ASSERT_EQ(cover.size(), 1u);
    EXPECT_EQ(cover.points()[0], (std::vector<double>{0.0, 0.0}));
}

TEST(GridCover, AgreesWithLipschitzBoundAtDOverT) {
    for (std::size_t d : {1u, 2u})
        for (std::size_t T : {32u, 128u, 512u, 1024u}) {
            double alpha = static_cast<double>(d) / T;
            auto cover = grid_cover(ExpertFamily::logistic(d, 1.0, 1.0), alpha);
            double thm1 = evaluate_bound(BoundSpec{BoundKind::CoverUpper, {{"T", double(T)}, {"alpha", alpha}, {"cover_size", double(cover.size())}}});
            double thm2 = evaluate_bound(BoundSpec{BoundKind::LipschitzUpper, {{"T", double(T)}, {"d", double(d)}, {"R", 1.0}, {"L", 1.0}}});
            EXPECT_LE(thm1, thm2 + 1e-12);
        }
}

TEST(GridCover, CapRejectsWithCount) {
    auto fam = ExpertFamily::logistic(2, 1.0, 1.0);
    try {
        grid_cover(fam, 0.001, 1000);
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("more than 1000 members"), std::string::npos);
    }
    EXPECT_THROW(grid_cover(fam, 1.0), std::invalid_argument);
}

TEST(Discretize, Examples) {
    auto disc = discretize(Table{{0.4, 0.25, 0.5, 0.75}}, 0.25);
    ASSERT_EQ(disc.levels, (std::vector<double>{0.25, 0.75}));
    EXPECT_EQ(disc.table[0], (std::vector<int>{1, 1, 1, 2}));
}

TEST(Discretize, LevelsCoverUnitInterval) {
    for (double alpha : {0.03, 0.05, 0.1, 1.0 / 6.0, 0.2, 0.25, 0.3, 0.49}) {
        auto z = discretization_levels(alpha);
        EXPECT_LE(z.size(), static_cast<std::size_t>(std::ceil(1.0 / (2 * alpha))) + 1);
        for (std::size_t k = 1; k < z.size(); ++k) EXPECT_NEAR(z[k] - z[k - 1], 2 * alpha, 1e-12);
        for (int i = 0; i <= 1000; ++i) {
            double v = i / 1000.0;
            int k = nearest_level(v, z);
            EXPECT_LE(std::abs(z[static_cast<std::size_t>(k - 1)] - v), alpha + 1e-12);
        }
    }
}

TEST(FatShattering, ConstantsZeroOne) {
    EXPECT_EQ(fat_shattering_number(Table{{0.0, 0.0}, {1.0, 1.0}}, 0.4).value, 1);
}

TEST(FatShattering, SingletonAndEmpty) {
    EXPECT_EQ(fat_shattering_number(Table{{0.3, 0.9}}, 0.1).value, 0);
    EXPECT_EQ(fat_shattering_number(Table{}, 0.1).value, -1);
}

TEST(FatShattering, CapFlag) {
    auto tab = all_functions(3, {0.0, 1.0});
    auto r = fat_shattering_number(tab, 0.4, 2);
    EXPECT_EQ(r.value, 2);
    EXPECT_TRUE(r.at_cap);
    EXPECT_EQ(fat_shattering_number(tab, 0.4).value, 3);
}

TEST(FatShattering, MatchesIndependentRecursion) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> lvl(0, 10);
    std::vector<double> witnesses;
    for (int i = 0; i <= 200; ++i) witnesses.push_back(i / 200.0);
    for (int trial = 0; trial < 60; ++trial) {
        std::size_t H = 1 + trial % 7, X = 1 + trial % 3;
        Table tab(H, std::vector<double>(X));
        for (auto& r : tab)
            for (double& v : r) v = lvl(rng) / 10.0;
        for (double alpha : {0.1, 0.2, 0.35}) {
            // midpoints of pairs are multiples of 0.05, all on the witness grid
            EXPECT_EQ(fat_shattering_number(tab, alpha).value, oracle_depth(tab, everyone(H), alpha, witnesses, 16))
                << "trial " << trial << " alpha " << alpha;
        }
    }
}

TEST(Fat1, ThreeConstants) {
    DiscretizedFamily fam{0.2, discretization_levels(0.2), {{1}, {2}, {3}}};
    EXPECT_EQ(fat1_number(fam).value, 1);
}

TEST(Fat1, AllFunctionsOnTwoPoints) {
    DiscretizedFamily fam{0.2, discretization_levels(0.2), {}};
    for (int a = 1; a <= 3; ++a)
        for (int b = 1; b <= 3; ++b) fam.table.push_back({a, b});
    EXPECT_EQ(fat1_number(fam).value, 2);
}

TEST(Fat1, Empty) {
    DiscretizedFamily fam{0.2, discretization_levels(0.2), {}};
    EXPECT_EQ(fat1_number(fam).value, -1);
}

TEST(Fat1, BoundedByFatShattering) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t H = 1 + trial % 9, X = 1 + trial % 3;
        Table tab(H, std::vector<double>(X));
        for (auto& r : tab)
            for (double& v : r) v = unif(rng);
        for (double alpha : {0.1, 0.17, 0.25}) {
            int f1 = fat1_number(discretize(tab, alpha)).value;
            int fat = fat_shattering_number(tab, alpha).value;
            EXPECT_LE(f1, fat) << "trial " << trial << " alpha " << alpha;
        }
    }
}

TEST(Shatter, CertificateVerifies) {
    auto tab = all_functions(2, {0.0, 0.5, 1.0});
    auto search = ShatterSearch::fat(tab, 0.2);
    int n = search.number(search.all(), 16).value;
    auto cert = search.certificate(search.all(), n);
    ASSERT_TRUE(cert.has_value());
    EXPECT_TRUE(cert->complete());
    EXPECT_TRUE(search.verify(*cert, search.all()));
    EXPECT_FALSE(search.certificate(search.all(), n + 1).has_value());
}

TEST(Msoa, SingletonNeverErrs) {
    DiscretizedFamily fam{0.2, discretization_levels(0.2), {{2, 3}}};
    std::vector<std::size_t> xs{0, 1, 1, 0};
    std::vector<int> ys{2, 3, 3, 2};
    EXPECT_EQ(msoa_run(fam, xs, ys, true).errors, 0u);
}

TEST(Msoa, ThreeConstantsAtMostOneError) {
    DiscretizedFamily fam{0.2, discretization_levels(0.2), {{1}, {2}, {3}}};
    for (int k = 1; k <= 3; ++k)
        for (std::size_t T = 1; T <= 6; ++T) {
            std::vector<std::size_t> xs(T, 0);
            std::vector<int> ys(T, k);
            EXPECT_LE(msoa_run(fam, xs, ys, true).errors, 1u);
        }
}

TEST(Msoa, NonRealizableTerminates) {
    DiscretizedFamily fam{0.2, discretization_levels(0.2), {{1}, {3}}};
    std::vector<std::size_t> xs(6, 0);
    std::vector<int> ys{1, 3, 1, 3, 1, 3};
    auto run = msoa_run(fam, xs, ys);
    EXPECT_EQ(run.predictions.size(), 6u);
    EXPECT_THROW(msoa_run(fam, xs, ys, true), std::logic_error);
}

TEST(MsoaCover, SingletonHasOneMember) {
    auto [cover, info] = msoa_cover(Table{{0.3, 0.8}}, 0.2, 4);
    EXPECT_EQ(info.fat1, 0);
    EXPECT_EQ(cover.size(), 1u);
}

TEST(MsoaCover, ThreeConstantsExhaustive) {
    const double alpha = 0.2;
    Table tab{{0.2}, {0.6}, {1.0}};
    auto [cover, info] = msoa_cover(tab, alpha, 3);
    EXPECT_EQ(info.levels, 3u);
    EXPECT_LE(cover.size(), 10u);
    EXPECT_DOUBLE_EQ(cover.alpha(), 3 * alpha);
    Features xs(3, Feature{0.0});
    for (const auto& h : tab) {
        bool covered = false;
        for (std::size_t g = 0; g < cover.size() && !covered; ++g) {
            bool ok = true;
            for (std::size_t t = 0; t < 3 && ok; ++t) ok = std::abs(h[0] - cover.eval(g, std::span<const Feature>(xs).first(t + 1))) <= 3 * alpha + 1e-12;
            covered = ok;
        }
        EXPECT_TRUE(covered);
    }
    EXPECT_LE(std::log(static_cast<double>(cover.size())), log_cover_size_power_bound(3, 3 * alpha, info.fat1) + 1e-12);
}

TEST(MsoaCover, CapRejected) {
    auto tab = all_functions(3, {0.1, 0.5, 0.9});
    EXPECT_THROW(msoa_cover(tab, 0.2, 30, 100), std::invalid_argument);
}

TEST(CoverSizeBound, Examples) {
    EXPECT_NEAR(cover_size_bound(10, 0.3, 0), 1.0, 1e-12);
    EXPECT_NEAR(cover_size_bound(3, 0.75, 1), 7.0, 1e-9);
    for (double T : {1.0, 5.0, 50.0, 500.0})
        for (double a : {0.05, 0.2, 0.75})
            for (int d = 0; d <= 6; ++d) EXPECT_LE(log_cover_size_bound(T, a, d), log_cover_size_power_bound(T, a, d) + 1e-9);
}

}  // namespace
}  // namespace seqlog
