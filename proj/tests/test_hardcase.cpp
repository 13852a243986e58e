#include "tmdp/hardcase.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

using namespace tmdp;

namespace {

HardCaseParams reference() {
    HardCaseParams p;
    p.K = 1;
    p.L = 4;
    p.beta = 0.2;
    p.gamma = 0.9;
    p.p0 = {{0.97, 0.9, 0.87, 0.7}};
    p.eps = 0.01;
    return p;
}

HardCaseParams two_states() {
    HardCaseParams p;
    p.K = 2;
    p.L = 3;
    p.beta = 0.2;
    p.gamma = 0.9;
    p.p0 = {{0.97, 0.9, 0.87}, {0.98, 0.9, 0.5}};
    p.eps = 0.005;
    return p;
}

} // namespace

TEST(HardCase, ReferenceDerivedValues) {
    const HardCaseDerived d = derive_params(reference());
    EXPECT_NEAR(d.p0k[0], 0.962962962962963, 1e-12);
    EXPECT_NEAR(d.eps0, 0.02344, 0.02344 * 1e-3);
    EXPECT_NEAR(d.alpha1[0], 3.94e-4, 3.94e-4 * 1e-2);
    EXPECT_NEAR(d.alpha2[0], 7.90e-4, 7.90e-4 * 1e-2);
    const double v1 = 1.0 / (1.0 - 0.9 * (d.p0k[0] + d.alpha1[0]));
    const double v2 = 1.0 / (1.0 - 0.9 * (d.p0k[0] + d.alpha2[0]));
    EXPECT_NEAR(v2 - v1, 0.0202, 0.0202 * 1e-2);
    EXPECT_GE(v2 - v1, 2 * 0.01);
    EXPECT_EQ(d.Lk[0], 3u);
    EXPECT_NEAR(d.v_prior[0], 7.874015748031496, 1e-12);
    EXPECT_NEAR(d.c_lower[0], 7.874015748031496 - 9.0 / 2.0036, 1e-12);
    EXPECT_NEAR(d.c_lower[0], 3.382, 3.382 * 1e-3);
    EXPECT_NEAR(d.c_lower_direct[0], d.c_lower[0], 1e-3);
    EXPECT_NEAR(d.c_bar, compute_c_bar(0.2, 0.9, 0.01), 1e-15);
}

TEST(HardCase, AlphaOneSolvesItsEquation) {
    for (double gamma : {0.5, 0.8, 0.95})
        for (double p : {0.5, 0.9, 0.99})
            for (double eps : {1e-4, 1e-3, 1e-2}) {
                const double a = hardcase_alpha1(gamma, p, eps);
                EXPECT_NEAR(1.0 / (1.0 - gamma * (p + a)) - 1.0 / (1.0 - gamma * p), 2 * eps, 1e-10);
            }
}

TEST(HardCase, AlphaOrderingBelowEpsZero) {
    for (double beta : {0.05, 0.2, 0.6, 1.5})
        for (double gamma : {0.9, 0.95, 0.99}) {
            if (!hardcase_gamma_valid(beta, gamma))
                continue;
            HardCaseParams p;
            p.L = 2;
            p.beta = beta;
            p.gamma = gamma;
            const double top = (1.0 + hardcase_floor(gamma)) / 2.0;
            p.p0 = {{top, top / 2}};
            const double eps0 = hardcase_eps0_term(beta, gamma, std::max(top - beta / 2, hardcase_floor(gamma)));
            for (double f : {0.01, 0.5, 0.99}) {
                p.eps = f * eps0;
                const HardCaseDerived d = derive_params(p);
                EXPECT_GT(d.alpha1[0], 0.0);
                EXPECT_LT(d.alpha1[0], d.alpha2[0]);
                EXPECT_LT(d.alpha2[0], beta / 2.0);
                EXPECT_LT(d.p0k[0] + d.alpha2[0], 1.0);
                EXPECT_GE(d.Lk[0], 1u);
                EXPECT_LE(d.Lk[0], p.L);
            }
        }
}

TEST(HardCase, RejectsOutOfDomainParameters) {
    HardCaseParams p = reference();
    p.eps = 0.03;
    EXPECT_THROW(derive_params(p), ParameterDomainError);
    p = reference();
    p.gamma = 0.3;
    EXPECT_THROW(derive_params(p), ParameterDomainError);
    p = reference();
    p.p0 = {{0.97, 0.98, 0.8, 0.7}};
    EXPECT_THROW(derive_params(p), ParameterDomainError);
    p = reference();
    p.p0 = {{0.95, 0.9, 0.8, 0.7}}; // not above the floor 0.96296
    EXPECT_THROW(derive_params(p), ParameterDomainError);
    p = reference();
    p.p0 = {{0.97, 0.9, 0.8}};
    EXPECT_THROW(derive_params(p), ParameterDomainError);
}

TEST(HardCase, WindowIsAPrefixOfTheSortedRow) {
    const HardCaseParams p = reference();
    const HardCaseDerived d = derive_params(p);
    const double centre = d.p0k[0] + d.alpha2[0];
    std::vector<std::size_t> members;
    for (std::size_t l = 0; l < p.L; ++l)
        if (std::abs(centre - p.p0[0][l]) <= p.beta / 2.0)
            members.push_back(l);
    ASSERT_EQ(members.size(), d.Lk[0]);
    for (std::size_t i = 0; i < members.size(); ++i)
        EXPECT_EQ(members[i], i);
    EXPECT_NEAR(centre - p.beta / 2.0, 0.86375, 1e-4);
}

TEST(HardCase, FamilyTopologyAndSize) {
    const HardCaseFamily fam = build_family(two_states());
    const auto& d = fam.derived;
    EXPECT_EQ(fam.num_hypotheses(), 1 + (d.Lk[0] - 1) + (d.Lk[1] - 1));
    const std::size_t K = 2, L = 3;
    for (std::size_t i = 0; i < fam.num_hypotheses(); ++i) {
        const Mdp& m = fam.hypothesis(i);
        ASSERT_EQ(m.num_states(), K + 2 * K * L);
        for (std::size_t k = 0; k < K; ++k) {
            EXPECT_EQ(m.layout().num_actions(k), L);
            for (std::size_t l = 0; l < L; ++l) {
                const StateId y1 = K + k * L + l, y2 = K + K * L + k * L + l;
                EXPECT_EQ(m.transition(k, l)[y1], 1.0);
                EXPECT_EQ(m.reward(k, l, y1), 1.0);
                EXPECT_EQ(m.layout().num_actions(y1), 1u);
                EXPECT_EQ(m.transition(y1, 0)[y1] + m.transition(y1, 0)[y2], 1.0);
                EXPECT_EQ(m.reward(y1, 0, y1), 1.0);
                EXPECT_EQ(m.reward(y1, 0, y2), 0.0);
                EXPECT_EQ(m.transition(y2, 0)[y2], 1.0);
                EXPECT_EQ(m.reward(y2, 0, y2), 0.0);
            }
        }
    }
}

TEST(HardCase, TwoByThreeHypothesisCount) {
    HardCaseParams p = two_states();
    p.p0 = {{0.97, 0.9, 0.87}, {0.98, 0.9, 0.5}};
    const HardCaseFamily fam = build_family(p);
    EXPECT_EQ(fam.derived.Lk, (std::vector<std::size_t>{3, 2}));
    EXPECT_EQ(fam.num_hypotheses(), 4u);
}

TEST(HardCase, SingleActionGivesOnlyM1) {
    HardCaseParams p = reference();
    p.p0 = {{0.97, 0.5, 0.4, 0.3}};
    const HardCaseFamily fam = build_family(p);
    EXPECT_EQ(fam.derived.Lk[0], 1u);
    EXPECT_TRUE(fam.hypotheses_kl.empty());
    EXPECT_TRUE(separation_check(fam).passed);
}

TEST(HardCase, QValuesMatchClosedForm) {
    const HardCaseFamily fam = build_family(two_states());
    for (std::size_t i = 0; i < fam.num_hypotheses(); ++i) {
        const Mdp& m = fam.hypothesis(i);
        const PlanResult plan = value_iteration(m, 1e-12);
        for (std::size_t k = 0; k < 2; ++k)
            for (std::size_t l = 0; l < 3; ++l) {
                const double p = m.transition(2 + k * 3 + l, 0)[2 + k * 3 + l];
                EXPECT_NEAR(plan.q.at(k, l), 1.0 / (1.0 - 0.9 * p), 1e-10);
            }
    }
}

TEST(HardCase, BallMembershipAndSeparation) {
    for (const HardCaseParams& p : {reference(), two_states()}) {
        const HardCaseFamily fam = build_family(p);
        EXPECT_TRUE(verify_ball_membership(fam));
        const SeparationReport rep = separation_check(fam);
        EXPECT_TRUE(rep.passed);
        for (const auto& m : rep.margins)
            if (m.hypothesis > 0)
                EXPECT_GE(m.margin, 2 * p.eps - 1e-9);
    }
}

TEST(HardCase, ReferenceMargin) {
    const SeparationReport rep = separation_check(build_family(reference()));
    ASSERT_EQ(rep.margins.size(), 3u);
    for (std::size_t i = 1; i < rep.margins.size(); ++i)
        EXPECT_NEAR(rep.margins[i].margin, 0.0202, 0.0202 * 1e-2);
    EXPECT_NEAR(rep.margins[0].margin, 0.02, 1e-9);
}

TEST(HardCase, InflatedAlphaLeavesTheBall) {
    const HardCaseParams p = reference();
    HardCaseDerived d = derive_params(p);
    // Centre pushed to 1, which is 0.13 away from p0(x, a_3) = 0.87 > beta/2.
    d.alpha2[0] = 1.0 - d.p0k[0];
    EXPECT_FALSE(verify_ball_membership(build_family(p, d)));
}

TEST(HardCase, RadiusTwoContainsEverything) {
    HardCaseParams p = reference();
    HardCaseDerived d = derive_params(p);
    p.beta = 1.99;
    d.alpha2[0] = 1.0 - d.p0k[0];
    HardCaseFamily fam = build_family(p, d);
    fam.params.beta = 2.0;
    EXPECT_TRUE(verify_ball_membership(fam));
}

TEST(HardCase, MinimalFamily) {
    HardCaseParams p;
    p.K = 1;
    p.L = 2;
    p.p0 = {{0.97, 0.96}};
    p.eps = 0.01;
    const HardCaseFamily fam = build_family(p);
    ASSERT_EQ(fam.hypotheses_kl.size(), 1u);
    const SeparationReport rep = separation_check(fam);
    EXPECT_TRUE(rep.passed);
    EXPECT_GE(rep.margins.back().margin, 2 * p.eps);
}

TEST(HardCase, BothThresholdFormsGiveLk) {
    for (const HardCaseParams& p : {reference(), two_states()}) {
        const HardCaseFamily fam = build_family(p);
        for (std::size_t k = 0; k < p.K; ++k) {
            EXPECT_EQ(hardcase_set_size(fam, k, fam.derived.c_lower_direct[k]), fam.derived.Lk[k]);
            EXPECT_EQ(hardcase_set_size(fam, k, fam.derived.c_lower[k]), fam.derived.Lk[k]);
        }
    }
}

TEST(HardCase, ManifestListsEveryModel) {
    const HardCaseFamily fam = build_family(two_states());
    const std::filesystem::path dir = std::string(TMDP_TEST_OUTPUT) + "/hardcase_manifest";
    std::filesystem::remove_all(dir);
    write_family_manifest(fam, dir);
    std::ifstream in(dir / "manifest.json");
    const auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j["hypotheses"].size(), fam.num_hypotheses());
    for (const auto& h : j["hypotheses"])
        EXPECT_TRUE(std::filesystem::exists(dir / h["file"].get<std::string>()));
    EXPECT_TRUE(std::filesystem::exists(dir / j["prior"].get<std::string>()));
}

TEST(LowerBoundCurves, DomainAndOrdering) {
    EXPECT_NEAR(hardcase_gamma_min(0.03), 0.7, 1e-12);
    EXPECT_FALSE(lower_bound_cell(0.03, 0.69, 0.5).valid);
    EXPECT_TRUE(lower_bound_cell(0.03, 0.71, 0.5).valid);
    std::vector<double> betas, gammas;
    for (int i = 0; i < 30; ++i)
        betas.push_back(0.01 + i * (1.89 / 29));
    for (int i = 0; i < 20; ++i)
        gammas.push_back(0.41 + i * 0.029);
    std::size_t valid = 0;
    for (const LowerBoundCell& c : lower_bound_curves(betas, gammas, 0.5)) {
        if (!c.valid)
            continue;
        ++valid;
        EXPECT_LE(c.c_lower, c.c_bar) << c.beta << " " << c.gamma;
        EXPECT_GT(c.alpha1, 0.0);
        EXPECT_LT(c.alpha1, c.alpha2);
        EXPECT_LT(c.alpha2, c.beta / 2);
    }
    EXPECT_GT(valid, 300u);
}

TEST(LowerBoundCurves, EpsZeroLinearInBeta) {
    for (double gamma : {0.5, 0.9, 0.99}) {
        std::vector<double> x, y;
        for (double beta = 0.1; beta < 1.9; beta += 0.1) {
            const LowerBoundCell c = lower_bound_cell(beta, gamma, 0.5);
            if (!c.valid)
                continue;
            x.push_back(beta);
            y.push_back(c.eps0);
        }
        ASSERT_GE(x.size(), 3u);
        for (std::size_t i = 1; i < x.size(); ++i)
            EXPECT_NEAR(y[i] / x[i], y[0] / x[0], 1e-12 * y[0] / x[0]);
    }
}
