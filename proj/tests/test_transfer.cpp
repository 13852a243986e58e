#include "tmdp/distance.hpp"
#include "tmdp/instances.hpp"
#include "tmdp/transfer.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace tmdp;

TEST(CBar, MatchesClosedForm) {
    EXPECT_NEAR(compute_c_bar(0.05, 0.9, 0.1), 9.995, 1e-12);
    EXPECT_NEAR(compute_c_bar(1.0, 0.5, 0.0), 4.0, 1e-15);
    EXPECT_NEAR(compute_c_bar(1e-12, 0.9, 0.0), 0.0, 1e-9);
    EXPECT_NEAR(compute_c_bar(0.05, 0.9, 0.1, ThresholdVariant::Soundness), 9.99, 1e-12);
    EXPECT_THROW(compute_c_bar(0.1, 1.0, 0.1), ParameterDomainError);
    EXPECT_THROW(compute_c_bar(-0.1, 0.9, 0.1), ParameterDomainError);
}

// With tv_distance <= beta, the candidate set at the soundness threshold keeps
// at every state an action within eps(1-gamma) of optimal in the target.
TEST(Elimination, SoundOnRandomPairs) {
    const double eps = 0.1, tol = 1e-9;
    std::size_t pairs = 0;
    for (double gamma : {0.5, 0.9})
        for (double beta : {0.05, 0.2})
            for (std::uint64_t seed = 1; seed <= 250; ++seed) {
                const Mdp m0 = random_mdp(2 + seed % 9, 5, gamma, seed);
                const Mdp m = perturb_within_ball(m0, beta, seed * 104729);
                const QFunction q0 = value_iteration(m0, tol).q;
                const QFunction q = value_iteration(m, tol).q;
                const CandidateSets c = candidate_set(
                    q0, compute_c_bar(beta, gamma, eps, ThresholdVariant::Soundness));
                for (StateId s = 0; s < m.num_states(); ++s) {
                    bool found = false;
                    for (ActionId a : c.actions[s])
                        found = found || q.at(s, a) >= q.max(s) - eps * (1.0 - gamma) - 2 * tol;
                    EXPECT_TRUE(found) << "seed " << seed << " state " << s;
                }
                ++pairs;
            }
    EXPECT_EQ(pairs, 1000u);
}

TEST(Elimination, ShrinkingBetaNeverEnlargesSets) {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const Mdp m0 = random_mdp(6, 5, 0.9, seed);
        const QFunction q0 = value_iteration(m0).q;
        const std::vector<double> betas{0.2, 0.1, 0.05, 0.01, 0.001};
        for (std::size_t i = 1; i < betas.size(); ++i) {
            const auto big = candidate_set(q0, compute_c_bar(betas[i - 1], 0.9, 0.1));
            const auto small = candidate_set(q0, compute_c_bar(betas[i], 0.9, 0.1));
            for (StateId s = 0; s < m0.num_states(); ++s)
                for (ActionId a : small.actions[s])
                    EXPECT_TRUE(big.contains(s, a));
        }
    }
}

TEST(TransferLearn, AuditMatchesSamplesPerPair) {
    const Mdp prior = ranked_action_mdp(6, 8, 0.9, 0.12, 4, 1);
    const Mdp truth = perturb_within_ball(prior, 0.001, 9);
    TransferConfig cfg;
    cfg.beta = 0.001;
    cfg.eps = 0.2;
    cfg.learner.budget_scale = 1e-3;
    GenerativeModel gm(truth, 5);
    const TransferOutcome out = transfer_learn(prior, gm, cfg);
    EXPECT_DOUBLE_EQ(out.c_bar, compute_c_bar(0.001, 0.9, 0.2));
    EXPECT_EQ(out.report.total, out.samples_per_pair * out.candidates.total_all_states());
    EXPECT_EQ(out.samples_multi, out.samples_per_pair * out.n_bar);
    EXPECT_EQ(out.num_multi, 5u);
    EXPECT_EQ(out.n_full, 40u);
    EXPECT_LE(out.n_bar, out.n_full / 2);
    EXPECT_DOUBLE_EQ(out.eliminated_fraction,
                     1.0 - static_cast<double>(out.n_bar) / static_cast<double>(out.n_full));
    for (StateId s = 0; s < truth.num_states(); ++s)
        for (ActionId a : truth.layout().actions(s))
            EXPECT_EQ(out.report.count(truth.layout(), s, a),
                      out.candidates.contains(s, a) ? out.samples_per_pair : 0u);
    EXPECT_NO_THROW(out.policy.validate(truth.layout()));
}

TEST(TransferLearn, SeparatedPriorTransfersItsPolicy) {
    // Runner-up gaps far above 2 beta/(1-gamma)^2 leave one action per state.
    const Mdp prior = ranked_action_mdp(5, 4, 0.9, 0.3, 2);
    const Mdp truth = perturb_within_ball(prior, 0.001, 3);
    TransferConfig cfg;
    cfg.beta = 0.001;
    cfg.eps = 0.1;
    cfg.learner.budget_scale = 1e-4;
    GenerativeModel gm(truth, 1);
    const TransferOutcome out = transfer_learn(prior, gm, cfg);
    EXPECT_EQ(out.n_bar, out.num_multi);
    const Policy prior_pi = value_iteration(prior).policy;
    EXPECT_EQ(out.policy, prior_pi);
    EXPECT_LE(optimality_gap(truth, prior_pi, 1e-11), 1e-9);
}

TEST(TransferLearn, TiedPriorKeepsFullSets) {
    MdpBuilder b(Layout({{0, 1, 2}, {0, 1}}), 0.9);
    for (StateId s : {0u, 1u})
        for (ActionId a : b.layout().actions(s))
            b.set_probability(s, a, 1 - s, 1.0).set_reward(s, a, 0.5);
    const Mdp prior = b.build();
    TransferConfig cfg;
    cfg.beta = 1e-6;
    cfg.eps = 0.5;
    cfg.learner.budget_scale = 1e-5;
    GenerativeModel gm(prior, 1);
    const TransferOutcome out = transfer_learn(prior, gm, cfg);
    EXPECT_EQ(out.candidates.actions, prior.layout().action_lists());
    EXPECT_EQ(out.eliminated_fraction, 0.0);
}

TEST(TransferLearn, PriorEqualToTruthSucceeds) {
    const Mdp m = random_mdp(5, 3, 0.9, 12);
    TransferConfig cfg;
    cfg.beta = 1e-6;
    cfg.eps = 0.1;
    cfg.learner.budget_scale = 1e-3;
    std::size_t ok = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        GenerativeModel gm(m, seed);
        ok += is_eps_optimal(m, transfer_learn(m, gm, cfg).policy, cfg.eps).optimal;
    }
    EXPECT_GE(ok, 190u);
}

TEST(TransferLearn, RejectsMismatchedModelsAndBadConfig) {
    const Mdp prior = random_mdp(4, 3, 0.9, 1);
    GenerativeModel other(random_mdp(4, 3, 0.9, 2), 1);
    EXPECT_THROW(transfer_learn(prior, other, TransferConfig{}), IncompatibleModels);
    GenerativeModel gm(prior, 1);
    TransferConfig bad;
    bad.delta = 0.0;
    EXPECT_THROW(transfer_learn(prior, gm, bad), ParameterDomainError);
    EXPECT_EQ(gm.total_samples(), 0u);
}

TEST(TransferOutcome, CsvAndJsonAgree) {
    const Mdp m = ranked_action_mdp(3, 3, 0.9, 0.2, 1, 1);
    TransferConfig cfg;
    cfg.beta = 0.01;
    cfg.learner.budget_scale = 1e-5;
    GenerativeModel gm(m, 2);
    const TransferOutcome out = transfer_learn(m, gm, cfg);
    std::ostringstream csv;
    write_outcome_csv_header(csv);
    write_outcome_csv_row(csv, 7, cfg, 0.9, out, true);
    const std::string text = csv.str();
    EXPECT_EQ(text.substr(0, text.find('\n')),
              "seed,beta,gamma,eps,c_bar,candidate_sizes,n_bar,n_full,multi_action_states,"
              "samples_per_pair,samples_total,samples_multi_action,eliminated_fraction,success");
    const auto j = outcome_json(cfg, 0.9, out, true);
    EXPECT_EQ(j["n_bar"].get<std::size_t>(), out.n_bar);
    EXPECT_EQ(j["samples_total"].get<std::uint64_t>(), out.report.total);
    EXPECT_EQ(j["candidate_sizes"].size(), 3u);
    EXPECT_NE(text.find("\n7,0.01,0.9,0.1,"), std::string::npos);
}
