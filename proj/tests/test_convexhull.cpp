#include "tmdp/convexhull.hpp"
#include "tmdp/instances.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tmdp;

namespace {

double l2(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

std::vector<Mdp> random_bases(std::size_t K, std::size_t S, std::size_t A, std::uint64_t seed) {
    std::vector<Mdp> out;
    for (std::size_t k = 0; k < K; ++k)
        out.push_back(random_uniform_mdp(S, A, 0.9, seed * 100 + k));
    return out;
}

std::vector<double> random_simplex_point(Rng& rng, std::size_t K) {
    return random_distribution(rng, K);
}

// Closed-form projection onto the segment {(t, 1-t)} for K = 2.
std::vector<double> project_segment(const std::vector<double>& v) {
    const double t = std::clamp((v[0] - v[1] + 1.0) / 2.0, 0.0, 1.0);
    return {t, 1.0 - t};
}

} // namespace

TEST(ProjectSimplex, Examples) {
    const auto a = project_simplex({0.6, 0.6});
    EXPECT_NEAR(a[0], 0.5, 1e-15);
    EXPECT_NEAR(a[1], 0.5, 1e-15);
    const auto b = project_simplex({1.2, -0.2});
    EXPECT_NEAR(b[0], 1.0, 1e-15);
    EXPECT_NEAR(b[1], 0.0, 1e-15);
    const std::vector<double> inside{0.2, 0.3, 0.5};
    const auto c = project_simplex(inside);
    for (std::size_t i = 0; i < 3; ++i)
        EXPECT_NEAR(c[i], inside[i], 1e-15);
}

TEST(ProjectSimplex, MatchesSegmentOracleForTwo) {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const std::vector<double> v{rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const auto got = project_simplex(v), want = project_segment(v);
        EXPECT_NEAR(got[0], want[0], 1e-12);
        EXPECT_NEAR(got[1], want[1], 1e-12);
    }
}

TEST(ProjectSimplex, IsNearestAmongRandomSimplexPoints) {
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> v(4);
        for (double& x : v)
            x = rng.uniform(-1, 2);
        const auto p = project_simplex(v);
        const double d = l2(p, v);
        for (int j = 0; j < 200; ++j)
            EXPECT_LE(d, l2(random_simplex_point(rng, 4), v) + 1e-12);
    }
}

TEST(ProjectSimplex, OutputOnSimplexIdempotentNonexpansive) {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> u(5), v(5);
        for (std::size_t k = 0; k < 5; ++k) {
            u[k] = rng.uniform(-3, 3);
            v[k] = rng.uniform(-3, 3);
        }
        const auto pu = project_simplex(u), pv = project_simplex(v);
        double sum = 0.0;
        for (double x : pu) {
            EXPECT_GE(x, 0.0);
            sum += x;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
        const auto ppu = project_simplex(pu);
        EXPECT_LE(l2(ppu, pu), 1e-12);
        EXPECT_LE(l2(pu, pv), l2(u, v) + 1e-12);
    }
}

TEST(AnchorSelection, SingleBase) {
    const std::vector<Mdp> bases{random_uniform_mdp(4, 2, 0.9, 1)};
    const HullModel hull = select_anchor_pairs(bases);
    ASSERT_EQ(hull.anchors.size(), 1u);
    EXPECT_EQ(hull.anchors[0].state, 0u);
    EXPECT_EQ(hull.anchors[0].action, 0u);
    EXPECT_NEAR(hull.lambda_min, hull.u_trun.squaredNorm(), 1e-14);
    EXPECT_NEAR(hull.lambda_max, hull.u_trun.squaredNorm(), 1e-14);
}

TEST(AnchorSelection, IdenticalBasesViolateRank) {
    const Mdp m = random_uniform_mdp(4, 2, 0.9, 1);
    EXPECT_THROW(select_anchor_pairs({m, m}), AssumptionViolation);
}

TEST(AnchorSelection, FindsTheOnlyInformativePair) {
    const Mdp a = random_uniform_mdp(5, 2, 0.9, 7);
    std::vector<double> p = a.transition_table();
    const std::size_t n = 5, pair = a.layout().pair_of(3, 1);
    const double shift = 0.5 * p[pair * n + 0];
    p[pair * n + 0] -= shift;
    p[pair * n + 4] += shift;
    const Mdp b(a.layout_ptr(), p, a.reward_table(), 0.9);
    const std::vector<Mdp> bases{a, b};
    const HullModel hull = select_anchor_pairs(bases);

    // Oracle: every pair set of size 2 reaching rank 2 contains pair (3, 1).
    for (std::size_t i = 0; i < a.num_pairs(); ++i)
        for (std::size_t j = i; j < a.num_pairs(); ++j) {
            const auto r = numerical_rank(detail::stack_blocks(bases, {i, j}));
            EXPECT_EQ(r == 2, i == pair || j == pair);
        }
    bool found = false;
    for (const auto& anchor : hull.anchors)
        found = found || (anchor.state == 3 && anchor.action == 1);
    EXPECT_TRUE(found);
    EXPECT_GT(hull.lambda_min, 0.0);
}

TEST(AnchorSelection, UTrunColumnsAreScaledRows) {
    const HullModel hull = select_anchor_pairs(random_bases(3, 6, 2, 1));
    ASSERT_EQ(hull.u_trun.rows(), 18);
    ASSERT_EQ(hull.u_trun.cols(), 3);
    for (Eigen::Index k = 0; k < 3; ++k) {
        EXPECT_NEAR(hull.u_trun.col(k).sum(), 1.0, 1e-12);
        EXPECT_GE(hull.u_trun.col(k).minCoeff(), 0.0);
    }
    EXPECT_EQ(numerical_rank(hull.u_trun), 3u);
}

TEST(Coefficients, NoiseFreeRecovery) {
    Rng rng(11);
    std::size_t trials = 0;
    for (std::size_t K = 1; K <= 5; ++K)
        for (std::uint64_t seed = 1; seed <= 4; ++seed) {
            const HullModel hull = select_anchor_pairs(random_bases(K, 8, 2, seed + 10 * K));
            ASSERT_GT(hull.lambda_min, 1e-8);
            for (int i = 0; i < 50; ++i, ++trials) {
                const auto c = random_simplex_point(rng, K);
                const auto est = estimate_coefficients_exact(hull, mix(hull.bases, c));
                EXPECT_LE(l2(est, c), 1e-9);
            }
        }
    EXPECT_EQ(trials, 1000u);
}

TEST(Coefficients, FixedExample) {
    const HullModel hull = select_anchor_pairs(random_bases(2, 6, 2, 3));
    const auto est = estimate_coefficients_exact(hull, mix(hull.bases, {0.3, 0.7}));
    EXPECT_NEAR(est[0], 0.3, 1e-9);
    EXPECT_NEAR(est[1], 0.7, 1e-9);
}

TEST(Coefficients, SingleBaseIsAlwaysOne) {
    const HullModel hull = select_anchor_pairs(random_bases(1, 4, 2, 3));
    GenerativeModel gm(hull.bases[0], 1);
    const auto est = estimate_coefficients(hull, gm, 5, 2);
    ASSERT_EQ(est.coefficients.size(), 1u);
    EXPECT_DOUBLE_EQ(est.coefficients[0], 1.0);
    EXPECT_EQ(est.samples, 5u);
}

TEST(Coefficients, SampledErrorShrinks) {
    const HullModel hull = select_anchor_pairs(random_bases(3, 6, 2, 5));
    const std::vector<double> c{0.3, 0.3, 0.4};
    const Mdp target = mix(hull.bases, c);
    std::vector<double> medians;
    for (std::uint64_t L : {1000u, 4000u, 16000u}) {
        std::vector<double> errs;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            GenerativeModel gm(target, seed);
            errs.push_back(l2(estimate_coefficients(hull, gm, L, seed + 7).coefficients, c));
            EXPECT_EQ(gm.total_samples(), L);
        }
        std::nth_element(errs.begin(), errs.begin() + 50, errs.end());
        medians.push_back(errs[50]);
    }
    for (std::size_t i = 1; i < medians.size(); ++i) {
        EXPECT_GE(medians[i] / medians[i - 1], 0.35);
        EXPECT_LE(medians[i] / medians[i - 1], 0.7);
    }
}

TEST(Coefficients, RejectsZeroSamples) {
    const HullModel hull = select_anchor_pairs(random_bases(2, 4, 2, 3));
    GenerativeModel gm(hull.bases[0], 1);
    EXPECT_THROW(estimate_coefficients(hull, gm, 0, 1), ParameterDomainError);
}

TEST(Mix, ConvexCombinationIsValid) {
    const auto bases = random_bases(3, 5, 3, 9);
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const auto c = random_simplex_point(rng, 3);
        const Mdp m = mix(bases, c);
        EXPECT_NO_THROW(Mdp(m.layout_ptr(), m.transition_table(), m.reward_table(), m.gamma()));
        for (std::size_t j = 0; j < m.transition_table().size(); ++j) {
            double want = 0.0;
            for (std::size_t k = 0; k < 3; ++k)
                want += c[k] * bases[k].transition_table()[j];
            EXPECT_NEAR(m.transition_table()[j], want, 1e-12);
        }
    }
    const Mdp vertex = mix(bases, {0.0, 1.0, 0.0});
    EXPECT_EQ(vertex.reward_table(), bases[1].reward_table());
}

TEST(HullTransfer, VertexTargetIsSolvedExactly) {
    const HullModel hull = select_anchor_pairs(random_bases(3, 6, 2, 2));
    for (std::size_t k = 0; k < 3; ++k) {
        std::vector<double> e(3, 0.0);
        e[k] = 1.0;
        const auto est = estimate_coefficients_exact(hull, hull.bases[k]);
        EXPECT_LE(l2(est, e), 1e-9);
        const Policy pi = value_iteration(mix(hull.bases, est)).policy;
        EXPECT_LE(optimality_gap(hull.bases[k], pi, 1e-11), 1e-8);
    }
}

TEST(HullTransfer, GapWithinBoundEveryTrial) {
    const HullModel hull = select_anchor_pairs(random_bases(3, 6, 2, 5));
    const std::vector<double> c{0.2, 0.5, 0.3};
    const Mdp target = mix(hull.bases, c);
    const double eps = 0.1;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        GenerativeModel gm(target, seed);
        const HullTransferResult r = hull_transfer(hull, gm, eps, 0.05, 1e-7, seed);
        const double alpha = l2(r.estimate.coefficients, c);
        const double gap = optimality_gap(target, r.policy, 1e-11);
        EXPECT_LE(gap, hull_gap_bound(eps, alpha, 3, 0.9) + 2e-9);
        EXPECT_EQ(r.report.total, r.estimate.samples);
        EXPECT_EQ(r.report.total,
                  static_cast<std::uint64_t>(std::ceil(1e-7 * theoretical_sample_count(hull, eps, 0.05))));
    }
}

TEST(HullTransfer, SampleCountFormula) {
    const HullModel hull = select_anchor_pairs(random_bases(2, 4, 2, 1));
    const double want = std::ceil(432.0 * 2 * hull.lambda_max /
                                  (0.01 * std::pow(0.1, 4) * hull.lambda_min * hull.lambda_min) *
                                  std::log(9.0 / 0.05));
    EXPECT_EQ(theoretical_sample_count(hull, 0.1, 0.05), want);
    EXPECT_NEAR(hull_gap_bound(0.1, 0.01, 4, 0.9), 0.05 + 6 * 0.01 * 2 / 0.01, 1e-12);
}

TEST(HullTransfer, ManifestWritten) {
    const HullModel hull = select_anchor_pairs(random_bases(2, 4, 2, 1));
    const std::filesystem::path dir = std::string(TMDP_TEST_OUTPUT) + "/hull_manifest";
    std::filesystem::remove_all(dir);
    write_hull_manifest(hull, dir);
    std::ifstream in(dir / "manifest.json");
    const auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j["bases"].size(), 2u);
    EXPECT_EQ(j["anchors"].size(), 2u);
    EXPECT_DOUBLE_EQ(j["lambda_min"].get<double>(), hull.lambda_min);
    EXPECT_TRUE(std::filesystem::exists(dir / "base_1.json"));
}
