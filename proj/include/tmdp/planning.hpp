#pragma once

#include "tmdp/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace tmdp {

/// Default planning tolerance on ||V - V*||_inf. Bound checks add
/// 2 * kPlanningTol of slack on top of the analytical bounds.
inline constexpr double kPlanningTol = 1e-9;

struct PlanResult {
    ValueFunction values;
    QFunction q;
    Policy policy;
    std::size_t iterations = 0;
    /// ||V_{t+1} - V_t||_inf for every sweep, in order.
    std::vector<double> gaps;
};

/// One Bellman backup: Q(s,a) = r(s,a) + gamma * sum_s' p(s'|s,a) V(s').
inline QFunction q_backup(const Mdp& mdp, std::span<const double> values) {
    const std::size_t n = mdp.num_states();
    std::vector<double> q(mdp.num_pairs());
    for (std::size_t pair = 0; pair < q.size(); ++pair) {
        const auto p = mdp.transition(pair);
        double acc = 0.0;
        for (StateId t = 0; t < n; ++t)
            acc += p[t] * values[t];
        q[pair] = mdp.expected_reward(pair) + mdp.gamma() * acc;
    }
    return QFunction(mdp.layout_ptr(), mdp.gamma(), std::move(q));
}

/// ||T V - V||_inf for the Bellman optimality operator T.
inline double bellman_residual(const Mdp& mdp, std::span<const double> values) {
    const QFunction q = q_backup(mdp, values);
    double worst = 0.0;
    for (StateId s = 0; s < mdp.num_states(); ++s)
        worst = std::max(worst, std::abs(q.max(s) - values[s]));
    return worst;
}

/// Value iteration from V = 0.
///
/// Stops once ||V_{t+1} - V_t|| <= tol (1-gamma) / (2 gamma), which by the
/// contraction bound gives ||V_{t+1} - V*|| <= tol / 2. Q is one backup of the
/// returned V; the policy is greedy in Q with lowest-label tie-breaking.
inline PlanResult value_iteration(const Mdp& mdp, double tol = kPlanningTol) {
    if (!(tol > 0.0))
        throw PlanningError("planning tolerance must be positive");
    const double gamma = mdp.gamma();
    const double stop = tol * (1.0 - gamma) / (2.0 * gamma);
    // Generous cap: the gap shrinks by gamma per sweep from at most 1/(1-gamma).
    const double needed = std::log(stop * (1.0 - gamma)) / std::log(gamma);
    const std::size_t cap = 100 + static_cast<std::size_t>(4.0 * std::max(needed, 1.0));

    const std::size_t n = mdp.num_states();
    const Layout& layout = mdp.layout();
    std::vector<double> v(n, 0.0), next(n, 0.0);
    PlanResult result{ValueFunction{}, QFunction::zeros(mdp.layout_ptr(), gamma), Policy{}, 0, {}};

    for (std::size_t it = 1;; ++it) {
        double gap = 0.0;
        for (StateId s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            const std::size_t first = layout.first_pair(s);
            for (std::size_t pair = first; pair < first + layout.num_actions(s); ++pair) {
                const auto p = mdp.transition(pair);
                double acc = 0.0;
                for (StateId t = 0; t < n; ++t)
                    acc += p[t] * v[t];
                best = std::max(best, mdp.expected_reward(pair) + gamma * acc);
            }
            if (!std::isfinite(best))
                throw PlanningError("value iteration produced a non-finite value at state " +
                                    std::to_string(s));
            next[s] = best;
            gap = std::max(gap, std::abs(best - v[s]));
        }
        v.swap(next);
        result.gaps.push_back(gap);
        result.iterations = it;
        if (gap <= stop)
            break;
        if (it >= cap)
            throw PlanningError("value iteration did not reach the requested tolerance");
    }

    result.values.values = std::move(v);
    result.q = q_backup(mdp, result.values.values);
    result.policy = greedy_policy(result.q);
    return result;
}

/// Exact V^pi from the linear system (I - gamma P^pi) V = R^pi.
inline ValueFunction policy_evaluation_exact(const Mdp& mdp, const Policy& pi) {
    pi.validate(mdp.layout());
    const std::size_t n = mdp.num_states();
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                  static_cast<Eigen::Index>(n));
    Eigen::VectorXd b(static_cast<Eigen::Index>(n));
    for (StateId s = 0; s < n; ++s) {
        const std::size_t pair = mdp.layout().pair_of(s, pi(s));
        const auto p = mdp.transition(pair);
        for (StateId t = 0; t < n; ++t)
            a(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) -= mdp.gamma() * p[t];
        b(static_cast<Eigen::Index>(s)) = mdp.expected_reward(pair);
    }
    const Eigen::VectorXd x = a.partialPivLu().solve(b);
    ValueFunction v;
    v.values.assign(x.data(), x.data() + x.size());
    for (double value : v.values)
        if (!std::isfinite(value))
            throw PlanningError("policy evaluation system is singular");
    return v;
}

struct EpsOptimality {
    bool optimal = false;
    /// V*(s) - V^pi(s) per state.
    std::vector<double> gaps;
    double worst_gap = 0.0;
};

/// V* to linear-solve accuracy: value iteration at `tol`, then policy
/// iteration from its greedy policy until no action improves by more than
/// rounding. A switch needs a gain above 1e-12 relative to the value scale.
inline ValueFunction optimal_values_exact(const Mdp& mdp, double tol = kPlanningTol) {
    Policy pi = value_iteration(mdp, tol).policy;
    const double slack = 1e-12 / (1.0 - mdp.gamma());
    for (std::size_t round = 0;; ++round) {
        ValueFunction v = policy_evaluation_exact(mdp, pi);
        const QFunction q = q_backup(mdp, v.values);
        bool changed = false;
        for (StateId s = 0; s < mdp.num_states(); ++s) {
            const ActionId best = q.argmax(s);
            if (q.at(s, best) > q.at(s, pi(s)) + slack) {
                pi.actions[s] = best;
                changed = true;
            }
        }
        if (!changed)
            return v;
        if (round > 1000)
            throw PlanningError("policy iteration did not settle");
    }
}

/// Whether V^pi(s) >= V*(s) - eps at every state, with both sides exact.
inline EpsOptimality is_eps_optimal(const Mdp& mdp, const Policy& pi, double eps) {
    if (!(eps > 0.0))
        throw PlanningError("eps must be positive");
    const ValueFunction vpi = policy_evaluation_exact(mdp, pi);
    const ValueFunction vstar = optimal_values_exact(mdp);
    EpsOptimality out;
    out.gaps.resize(mdp.num_states());
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        out.gaps[s] = vstar[s] - vpi[s];
        out.worst_gap = std::max(out.worst_gap, out.gaps[s]);
    }
    out.optimal = out.worst_gap <= eps;
    return out;
}

/// max_s (V*(s) - V^pi(s)) with both sides exact; `tol` seeds the search.
inline double optimality_gap(const Mdp& mdp, const Policy& pi, double tol = kPlanningTol) {
    const ValueFunction vpi = policy_evaluation_exact(mdp, pi);
    const ValueFunction vstar = optimal_values_exact(mdp, tol);
    double worst = 0.0;
    for (StateId s = 0; s < mdp.num_states(); ++s)
        worst = std::max(worst, vstar[s] - vpi[s]);
    return worst;
}

} // namespace tmdp
