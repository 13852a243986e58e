#pragma once

#include "tmdp/candidates.hpp"
#include "tmdp/format.hpp"
#include "tmdp/planning.hpp"
#include "tmdp/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <vector>

namespace tmdp {

struct LearnerConfig {
    double eps = 0.1;
    double delta = 0.05;
    /// Multiplier on the theoretical per-pair sample count.
    double budget_scale = 1.0;
    /// Q-learning sweeps.
    std::size_t max_iters = 1000;
    /// Step size h/(h+t) at sweep t.
    double step_h = 50.0;
    double planning_tol = kPlanningTol;

    void validate() const {
        if (!(eps > 0.0))
            throw ParameterDomainError("learner eps must be positive");
        if (!(delta > 0.0 && delta < 1.0))
            throw ParameterDomainError("learner delta must lie in (0,1)");
        if (!(budget_scale > 0.0))
            throw ParameterDomainError("learner budget_scale must be positive (zero budget)");
        if (!(step_h > 0.0))
            throw ParameterDomainError("learner step_h must be positive");
    }
};

/// Per-pair sample count of the plug-in learner:
/// ceil(scale * log(2 * total_pairs / delta) / ((1-gamma)^3 eps^2)).
inline std::uint64_t plug_in_samples_per_pair(const LearnerConfig& cfg, double gamma,
                                              std::size_t total_pairs) {
    const double h = 1.0 - gamma;
    const double n = cfg.budget_scale * std::log(2.0 * static_cast<double>(total_pairs) / cfg.delta) /
                     (h * h * h * cfg.eps * cfg.eps);
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(n)));
}

struct EmpiricalModelResult {
    Policy policy;
    std::uint64_t samples_per_pair = 0;
};

/// Model-based plug-in learner.
///
/// Draws the same number of samples from every pair in `action_sets`, builds
/// the empirical MDP on those actions only (the contracted model), plans on it
/// and returns its greedy policy. No other pair is ever queried.
inline EmpiricalModelResult empirical_model_learner(GenerativeModel& gm,
                                                    const CandidateSets& action_sets,
                                                    const LearnerConfig& cfg) {
    cfg.validate();
    const Layout& full = gm.layout();
    const std::size_t n = full.num_states();
    if (action_sets.actions.size() != n)
        throw ModelError("action sets must cover every state");
    for (StateId s = 0; s < n; ++s) {
        if (action_sets.actions[s].empty())
            throw ModelError("empty action set at state " + std::to_string(s));
        for (ActionId a : action_sets.actions[s])
            full.slot_of(s, a);
    }

    Layout restricted = action_sets.as_layout();
    const std::uint64_t per_pair =
        plug_in_samples_per_pair(cfg, gm.gamma(), restricted.num_pairs());

    std::vector<double> p(restricted.num_pairs() * n, 0.0), r(p.size(), 0.0);
    const double weight = 1.0 / static_cast<double>(per_pair);
    for (std::size_t pair = 0; pair < restricted.num_pairs(); ++pair) {
        const StateId s = restricted.state_of_pair(pair);
        const ActionId a = restricted.action_of_pair(pair);
        for (std::uint64_t i = 0; i < per_pair; ++i) {
            const Transition tr = gm.sample(s, a);
            p[pair * n + tr.next] += weight;
            r[pair * n + tr.next] = tr.reward;
        }
        // Counts times 1/n can drift from 1 by a few ulps; renormalise exactly.
        double sum = 0.0;
        for (StateId t = 0; t < n; ++t)
            sum += p[pair * n + t];
        for (StateId t = 0; t < n; ++t)
            p[pair * n + t] /= sum;
    }

    const Mdp empirical(std::move(restricted), std::move(p), std::move(r), gm.gamma());
    const PlanResult plan = value_iteration(empirical, cfg.planning_tol);
    return {plan.policy, per_pair};
}

struct CurvePoint {
    std::size_t sweep = 0;
    std::uint64_t samples_used = 0;
    double min_value = 0.0;
    double mean_value = 0.0;
};

struct LearningCurve {
    std::vector<CurvePoint> points;
    QFunction final_q;
};

/// Checkpoints (in sweeps; 0 = before any update) and the evaluator used to
/// score the greedy policy at each of them.
struct EvalSchedule {
    std::vector<std::size_t> sweeps;
    std::function<ValueFunction(const Policy&)> evaluate;
};

/// Evaluator that scores a policy exactly on `truth`. `truth` must outlive it.
inline std::function<ValueFunction(const Policy&)> exact_evaluator(const Mdp& truth) {
    return [&truth](const Policy& pi) { return policy_evaluation_exact(truth, pi); };
}

/// Every `every` sweeps from 0 through `total`, always including `total`.
inline std::vector<std::size_t> regular_checkpoints(std::size_t total, std::size_t every) {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < total; t += std::max<std::size_t>(every, 1))
        out.push_back(t);
    out.push_back(total);
    return out;
}

/// Synchronous Q-learning with one generative sample per pair per sweep:
/// Q(s,a) <- (1-eta_t) Q(s,a) + eta_t (r + gamma max_a' Q(s',a')), eta_t = h/(h+t).
inline LearningCurve q_learning(GenerativeModel& gm, const QFunction& init_q,
                                const LearnerConfig& cfg, const EvalSchedule& schedule) {
    if (!(init_q.layout() == gm.layout()))
        throw ModelError("initial Q-function does not match the model structure");
    if (!(cfg.step_h > 0.0))
        throw ParameterDomainError("learner step_h must be positive");
    const Layout& layout = gm.layout();
    const double gamma = gm.gamma();
    const std::uint64_t start = gm.total_samples();

    QFunction q = init_q;
    std::vector<double> next_values(layout.num_pairs());
    std::vector<double> vmax(layout.num_states());
    LearningCurve curve{{}, init_q};

    std::vector<std::size_t> checkpoints = schedule.sweeps;
    std::sort(checkpoints.begin(), checkpoints.end());
    std::size_t next_checkpoint = 0;

    auto record = [&](std::size_t sweep) {
        while (next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] < sweep)
            ++next_checkpoint;
        if (next_checkpoint >= checkpoints.size() || checkpoints[next_checkpoint] != sweep)
            return;
        ++next_checkpoint;
        if (!schedule.evaluate)
            return;
        const ValueFunction v = schedule.evaluate(greedy_policy(q));
        CurvePoint point;
        point.sweep = sweep;
        point.samples_used = gm.total_samples() - start;
        point.min_value = *std::min_element(v.values.begin(), v.values.end());
        point.mean_value = std::accumulate(v.values.begin(), v.values.end(), 0.0) /
                           static_cast<double>(v.size());
        curve.points.push_back(point);
    };

    record(0);
    for (std::size_t t = 1; t <= cfg.max_iters; ++t) {
        const double eta = cfg.step_h / (cfg.step_h + static_cast<double>(t));
        for (StateId s = 0; s < layout.num_states(); ++s)
            vmax[s] = q.max(s);
        for (std::size_t pair = 0; pair < layout.num_pairs(); ++pair) {
            const Transition tr =
                gm.sample(layout.state_of_pair(pair), layout.action_of_pair(pair));
            next_values[pair] = (1.0 - eta) * q[pair] + eta * (tr.reward + gamma * vmax[tr.next]);
        }
        for (std::size_t pair = 0; pair < layout.num_pairs(); ++pair)
            q[pair] = next_values[pair];
        record(t);
    }
    curve.final_q = std::move(q);
    return curve;
}

/// Learning-curve CSV: samples_used, greedy_policy_min_value, greedy_policy_mean_value.
inline void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& points) {
    out << "samples_used,greedy_policy_min_value,greedy_policy_mean_value\n";
    for (const auto& p : points)
        out << p.samples_used << ',' << format_double(p.min_value) << ','
            << format_double(p.mean_value) << '\n';
}

inline void write_curve_csv(std::ostream& out, const LearningCurve& curve) {
    write_curve_csv(out, curve.points);
}

} // namespace tmdp
