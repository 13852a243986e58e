#include "tmdp/distance.hpp"
#include "tmdp/instances.hpp"
#include "tmdp/learners.hpp"
#include "tmdp/sailing.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace tmdp;

namespace {

CandidateSets all_actions(const Layout& layout) {
    CandidateSets c;
    c.actions = layout.action_lists();
    c.total_count = layout.multi_action_pairs();
    return c;
}

Mdp deterministic_chain(double gamma) {
    MdpBuilder b(Layout({{0, 1}, {0, 1}}), gamma);
    b.set_probability(0, 0, 1, 1.0).set_reward(0, 0, 1, 0.3);
    b.set_probability(0, 1, 0, 1.0).set_reward(0, 1, 0, 0.6);
    b.set_probability(1, 0, 0, 1.0).set_reward(1, 0, 0, 1.0);
    b.set_probability(1, 1, 1, 1.0).set_reward(1, 1, 1, 0.1);
    return b.build();
}

double success_rate(const Mdp& m, double budget_scale, double eps, std::uint64_t trials) {
    LearnerConfig cfg;
    cfg.eps = eps;
    cfg.budget_scale = budget_scale;
    const CandidateSets sets = all_actions(m.layout());
    std::uint64_t ok = 0;
    for (std::uint64_t seed = 1; seed <= trials; ++seed) {
        GenerativeModel gm(m, seed);
        ok += is_eps_optimal(m, empirical_model_learner(gm, sets, cfg).policy, eps).optimal;
    }
    return static_cast<double>(ok) / static_cast<double>(trials);
}

} // namespace

TEST(LearnerConfig, RejectsInvalidFields) {
    LearnerConfig c;
    EXPECT_NO_THROW(c.validate());
    c.budget_scale = 0.0;
    EXPECT_THROW(c.validate(), ParameterDomainError);
    c = LearnerConfig{};
    c.eps = 0.0;
    EXPECT_THROW(c.validate(), ParameterDomainError);
    c = LearnerConfig{};
    c.delta = 1.0;
    EXPECT_THROW(c.validate(), ParameterDomainError);
}

TEST(PlugInLearner, SampleCountFormula) {
    LearnerConfig c;
    c.eps = 0.1;
    c.delta = 0.05;
    c.budget_scale = 1e-3;
    // ceil(1e-3 * log(2 * 12 / 0.05) / (0.1^3 * 0.1^2)) = ceil(617.3...) = 618
    EXPECT_EQ(plug_in_samples_per_pair(c, 0.9, 12), 618u);
    c.budget_scale = 1e-12;
    EXPECT_EQ(plug_in_samples_per_pair(c, 0.9, 12), 1u);
}

TEST(PlugInLearner, DeterministicModelIsSolvedExactly) {
    const Mdp m = deterministic_chain(0.9);
    LearnerConfig cfg;
    cfg.budget_scale = 1e-12; // one sample per pair
    GenerativeModel gm(m, 4);
    const auto r = empirical_model_learner(gm, all_actions(m.layout()), cfg);
    EXPECT_EQ(r.samples_per_pair, 1u);
    EXPECT_EQ(r.policy, value_iteration(m).policy);
    EXPECT_EQ(gm.report().total, m.num_pairs());
}

TEST(PlugInLearner, SingletonSetsReturnThatMap) {
    const Mdp m = random_mdp(6, 4, 0.9, 2);
    CandidateSets sets;
    for (StateId s = 0; s < m.num_states(); ++s)
        sets.actions.push_back({m.layout().actions(s).back()});
    LearnerConfig cfg;
    cfg.budget_scale = 1e-4;
    GenerativeModel gm(m, 7);
    const auto r = empirical_model_learner(gm, sets, cfg);
    for (StateId s = 0; s < m.num_states(); ++s) {
        EXPECT_EQ(r.policy(s), sets.actions[s][0]);
        for (ActionId a : m.layout().actions(s))
            EXPECT_EQ(gm.report().count(m.layout(), s, a),
                      a == sets.actions[s][0] ? r.samples_per_pair : 0u);
    }
    EXPECT_EQ(gm.report().total, r.samples_per_pair * m.num_states());
}

TEST(PlugInLearner, RejectsEmptyOrUnavailableSets) {
    const Mdp m = random_mdp(3, 2, 0.9, 2);
    GenerativeModel gm(m, 1);
    CandidateSets sets = all_actions(m.layout());
    sets.actions[1].clear();
    EXPECT_THROW(empirical_model_learner(gm, sets, LearnerConfig{}), ModelError);
    sets = all_actions(m.layout());
    sets.actions[0] = {42};
    EXPECT_THROW(empirical_model_learner(gm, sets, LearnerConfig{}), InvalidAction);
    LearnerConfig zero;
    zero.budget_scale = 0.0;
    EXPECT_THROW(empirical_model_learner(gm, all_actions(m.layout()), zero), ParameterDomainError);
    EXPECT_EQ(gm.total_samples(), 0u);
}

TEST(PlugInLearner, BanditGapIsFoundReliably) {
    // Two actions per state with a Q-gap of exactly 0.5.
    const Mdp m = ranked_action_mdp(4, 2, 0.9, 0.5, 21);
    EXPECT_GE(success_rate(m, 1e-3, 0.1, 200), 0.95);
}

TEST(PlugInLearner, FailureRateFallsWithBudget) {
    const Mdp m = random_mdp(5, 3, 0.9, 17);
    const double lo = success_rate(m, 1e-6, 0.1, 100);
    const double mid = success_rate(m, 1e-5, 0.1, 100);
    const double hi = success_rate(m, 1e-3, 0.1, 100);
    EXPECT_LE(lo, mid);
    EXPECT_LE(mid, hi);
    EXPECT_LT(lo, hi);
    EXPECT_GE(hi, 0.95);
}

TEST(QLearning, StartsAtOptimumFromExactQ) {
    const Mdp m = random_mdp(5, 3, 0.9, 3);
    const PlanResult plan = value_iteration(m, 1e-12);
    GenerativeModel gm(m, 1);
    LearnerConfig cfg;
    cfg.max_iters = 10;
    const LearningCurve curve = q_learning(gm, plan.q, cfg, {{0}, exact_evaluator(m)});
    ASSERT_EQ(curve.points.size(), 1u);
    const double vmin = *std::min_element(plan.values.values.begin(), plan.values.values.end());
    EXPECT_NEAR(curve.points[0].min_value, vmin, 1e-9);
    EXPECT_EQ(curve.points[0].samples_used, 0u);
}

TEST(QLearning, ConvergesOnDeterministicChain) {
    const Mdp m = deterministic_chain(0.5);
    GenerativeModel gm(m, 1);
    LearnerConfig cfg;
    cfg.max_iters = 5000;
    const LearningCurve curve =
        q_learning(gm, QFunction::zeros(m.layout_ptr(), m.gamma()), cfg, {});
    const QFunction qstar = value_iteration(m, 1e-12).q;
    for (std::size_t i = 0; i < m.num_pairs(); ++i)
        EXPECT_NEAR(curve.final_q[i], qstar[i], 1e-3);
    EXPECT_EQ(gm.total_samples(), 5000u * m.num_pairs());
}

TEST(QLearning, IteratesStayInValueRange) {
    const Mdp m = random_mdp(6, 3, 0.8, 9);
    GenerativeModel gm(m, 2);
    LearnerConfig cfg;
    cfg.step_h = 1.0; // aggressive steps stress the bound
    for (std::size_t iters : {1u, 5u, 50u, 300u}) {
        cfg.max_iters = iters;
        const LearningCurve c = q_learning(gm, QFunction::zeros(m.layout_ptr(), 0.8), cfg, {});
        for (double q : c.final_q.values()) {
            EXPECT_GE(q, 0.0);
            EXPECT_LE(q, 5.0 + 1e-12);
        }
    }
}

TEST(QLearning, CheckpointsRecordSamplesUsed) {
    const Mdp m = random_mdp(4, 2, 0.9, 5);
    GenerativeModel gm(m, 3);
    LearnerConfig cfg;
    cfg.max_iters = 100;
    const auto checkpoints = regular_checkpoints(100, 30);
    EXPECT_EQ(checkpoints, (std::vector<std::size_t>{0, 30, 60, 90, 100}));
    const LearningCurve c =
        q_learning(gm, QFunction::zeros(m.layout_ptr(), 0.9), cfg, {checkpoints, exact_evaluator(m)});
    ASSERT_EQ(c.points.size(), 5u);
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        EXPECT_EQ(c.points[i].samples_used, checkpoints[i] * m.num_pairs());
        EXPECT_LE(c.points[i].min_value, c.points[i].mean_value);
    }
    std::ostringstream out;
    write_curve_csv(out, c);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')),
              "samples_used,greedy_policy_min_value,greedy_policy_mean_value");
}

TEST(QLearning, WarmStartJumpsAhead) {
    SailingInstance inst;
    inst.width = inst.height = 4;
    inst.goal_x = inst.goal_y = 3;
    inst.wind_directions = 4;
    inst.gamma = 0.9;
    const Mdp prior = make_sailing(inst, 3);
    const Mdp truth = perturb_within_ball(prior, 0.3, 8);
    const QFunction prior_q = value_iteration(prior).q;
    LearnerConfig cfg;
    cfg.max_iters = 0;
    const EvalSchedule first{{0}, exact_evaluator(truth)};
    GenerativeModel a(truth, 1), b(truth, 1);
    const auto warm = q_learning(a, QFunction(truth.layout_ptr(), 0.9, prior_q.values()), cfg, first);
    const auto scratch = q_learning(b, QFunction::zeros(truth.layout_ptr(), 0.9), cfg, first);
    EXPECT_GT(warm.points[0].mean_value, scratch.points[0].mean_value);
}
