#pragma once

#include "tmdp/candidates.hpp"
#include "tmdp/format.hpp"
#include "tmdp/learners.hpp"
#include "tmdp/planning.hpp"
#include "tmdp/sampling.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

namespace tmdp {

enum class ThresholdVariant {
    /// min{2/(1-g), 2b/(1-g)^2} - eps(1-g)/2
    Transfer,
    /// 2 min{1/(1-g), b/(1-g)^2} - eps(1-g)
    Soundness,
};

/// Elimination threshold for a prior within TV radius `beta` of the target.
inline double compute_c_bar(double beta, double gamma, double eps,
                            ThresholdVariant variant = ThresholdVariant::Transfer) {
    if (!(beta >= 0.0) || !(eps >= 0.0))
        throw ParameterDomainError("beta and eps must be nonnegative");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw ParameterDomainError("gamma must lie in (0,1)");
    const double h = 1.0 - gamma;
    const double head = std::min(2.0 / h, 2.0 * beta / (h * h));
    return variant == ThresholdVariant::Transfer ? head - eps * h / 2.0 : head - eps * h;
}

/// Upper bound on ||Q*_0 - Q*||_inf over the TV ball of radius `beta`.
inline double q_gap_bound(double beta, double gamma) {
    const double h = 1.0 - gamma;
    return std::min(1.0 / h, beta / (h * h));
}

struct TransferConfig {
    double beta = 0.1;
    double eps = 0.1;
    double delta = 0.05;
    LearnerConfig learner;
    ThresholdVariant variant = ThresholdVariant::Transfer;

    void validate() const {
        if (!(beta > 0.0))
            throw ParameterDomainError("transfer beta must be positive");
        if (!(eps > 0.0))
            throw ParameterDomainError("transfer eps must be positive");
        if (!(delta > 0.0 && delta < 1.0))
            throw ParameterDomainError("transfer delta must lie in (0,1)");
    }
};

struct TransferOutcome {
    double c_bar = 0.0;
    CandidateSets candidates;
    Policy policy;
    SampleBudgetReport report;
    std::uint64_t samples_per_pair = 0;
    /// Sum over multi-action states of |A^s(c_bar)|.
    std::size_t n_bar = 0;
    /// Sum over multi-action states of |A^s|.
    std::size_t n_full = 0;
    /// |S'|, the number of multi-action states.
    std::size_t num_multi = 0;
    /// Samples drawn at multi-action states.
    std::uint64_t samples_multi = 0;
    double eliminated_fraction = 0.0;
};

/// Plan on the prior, keep A^s(c_bar), learn an eps/2-optimal policy on the
/// contracted model with the plug-in learner.
inline TransferOutcome transfer_learn(const Mdp& prior, GenerativeModel& gm,
                                      const TransferConfig& cfg) {
    cfg.validate();
    if (!(prior.layout() == gm.layout()) || prior.gamma() != gm.gamma())
        throw IncompatibleModels("prior and target differ in structure or discount");

    TransferOutcome out;
    out.c_bar = compute_c_bar(cfg.beta, prior.gamma(), cfg.eps, cfg.variant);
    const PlanResult plan = value_iteration(prior, kPlanningTol);
    out.candidates = candidate_set(plan.q, out.c_bar);
    for (StateId s = 0; s < prior.num_states(); ++s)
        if (out.candidates.actions[s].empty())
            throw Error("internal error: empty candidate set at state " + std::to_string(s));

    LearnerConfig lc = cfg.learner;
    lc.eps = cfg.eps / 2.0;
    lc.delta = cfg.delta;
    const EmpiricalModelResult learned = empirical_model_learner(gm, out.candidates, lc);
    out.policy = learned.policy;
    out.samples_per_pair = learned.samples_per_pair;
    out.report = gm.report();

    const Layout& layout = prior.layout();
    const auto multi = layout.multi_action_states();
    out.n_bar = out.candidates.total_count;
    out.n_full = layout.multi_action_pairs();
    out.num_multi = multi.size();
    out.samples_multi = out.report.total_over(multi);
    out.eliminated_fraction =
        out.n_full == 0 ? 0.0
                        : 1.0 - static_cast<double>(out.n_bar) / static_cast<double>(out.n_full);
    return out;
}

/// Outcome summary for one run. `success` is the exact-oracle verdict.
inline nlohmann::ordered_json outcome_json(const TransferConfig& cfg, double gamma,
                                           const TransferOutcome& o, bool success) {
    nlohmann::ordered_json j;
    j["beta"] = cfg.beta;
    j["gamma"] = gamma;
    j["eps"] = cfg.eps;
    j["c_bar"] = o.c_bar;
    std::vector<std::size_t> sizes;
    for (const auto& list : o.candidates.actions)
        sizes.push_back(list.size());
    j["candidate_sizes"] = sizes;
    j["n_bar"] = o.n_bar;
    j["n_full"] = o.n_full;
    j["multi_action_states"] = o.num_multi;
    j["samples_per_pair"] = o.samples_per_pair;
    j["samples_total"] = o.report.total;
    j["samples_multi_action"] = o.samples_multi;
    j["eliminated_fraction"] = o.eliminated_fraction;
    j["success"] = success;
    return j;
}

inline void write_outcome_csv_header(std::ostream& out) {
    out << "seed,beta,gamma,eps,c_bar,candidate_sizes,n_bar,n_full,multi_action_states,"
           "samples_per_pair,samples_total,samples_multi_action,eliminated_fraction,success\n";
}

/// One CSV row; candidate sizes are joined with ';'.
inline void write_outcome_csv_row(std::ostream& out, std::uint64_t seed, const TransferConfig& cfg,
                                  double gamma, const TransferOutcome& o, bool success) {
    out << seed << ',' << format_double(cfg.beta) << ',' << format_double(gamma) << ','
        << format_double(cfg.eps) << ',' << format_double(o.c_bar) << ',';
    for (std::size_t s = 0; s < o.candidates.actions.size(); ++s)
        out << (s ? ";" : "") << o.candidates.actions[s].size();
    out << ',' << o.n_bar << ',' << o.n_full << ',' << o.num_multi << ',' << o.samples_per_pair
        << ',' << o.report.total << ',' << o.samples_multi << ',' << format_double(o.eliminated_fraction) << ','
        << (success ? 1 : 0) << '\n';
}

} // namespace tmdp
