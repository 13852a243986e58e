#pragma once

// Seeded instance generators used by tests and experiments.

#include "tmdp/mdp.hpp"
#include "tmdp/rng.hpp"

#include <cstdint>
#include <vector>

namespace tmdp {

/// Flat Dirichlet draw of length n.
inline std::vector<double> random_distribution(Rng& rng, std::size_t n) {
    std::vector<double> out(n);
    double sum = 0.0;
    for (double& x : out) {
        x = rng.exponential();
        sum += x;
    }
    for (double& x : out)
        x /= sum;
    return out;
}

/// Random model with between 1 and `max_actions` actions per state, flat
/// Dirichlet transition rows and uniform rewards per (s, a, s').
inline Mdp random_mdp(std::size_t num_states, std::size_t max_actions, double gamma,
                      std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<ActionId>> actions(num_states);
    for (auto& list : actions) {
        const std::size_t count = 1 + static_cast<std::size_t>(rng.below(max_actions));
        for (std::size_t a = 0; a < count; ++a)
            list.push_back(a);
    }
    const Layout layout(std::move(actions));
    std::vector<double> p, r;
    p.reserve(layout.num_pairs() * num_states);
    for (std::size_t pair = 0; pair < layout.num_pairs(); ++pair) {
        const auto row = random_distribution(rng, num_states);
        p.insert(p.end(), row.begin(), row.end());
        for (std::size_t t = 0; t < num_states; ++t)
            r.push_back(rng.uniform());
    }
    return Mdp(layout, std::move(p), std::move(r), gamma);
}

/// Random model with a fixed action count everywhere; handy for hull bases.
inline Mdp random_uniform_mdp(std::size_t num_states, std::size_t num_actions, double gamma,
                              std::uint64_t seed) {
    Rng rng(seed);
    const Layout layout = Layout::uniform(num_states, num_actions);
    std::vector<double> p, r;
    for (std::size_t pair = 0; pair < layout.num_pairs(); ++pair) {
        const auto row = random_distribution(rng, num_states);
        p.insert(p.end(), row.begin(), row.end());
        for (std::size_t t = 0; t < num_states; ++t)
            r.push_back(rng.uniform());
    }
    return Mdp(layout, std::move(p), std::move(r), gamma);
}

/// Model with a known action ranking.
///
/// All actions at a state share one random transition row, and the reward of
/// action a at state s is base_s - gap * a regardless of the next state, so
/// Q*(s, a) = Q*(s, 0) - gap * a exactly. base_s is drawn from
/// [gap (A-1), 1]. The last `single_action_states` states keep only action 0.
inline Mdp ranked_action_mdp(std::size_t num_states, std::size_t num_actions, double gamma,
                             double gap, std::uint64_t seed,
                             std::size_t single_action_states = 0) {
    const double floor = gap * static_cast<double>(num_actions - 1);
    if (!(gap >= 0.0) || floor > 1.0)
        throw ModelError("gap * (actions - 1) must lie in [0, 1]");
    Rng rng(seed);
    std::vector<std::vector<ActionId>> actions(num_states);
    for (std::size_t s = 0; s < num_states; ++s) {
        const std::size_t count = s + single_action_states >= num_states ? 1 : num_actions;
        for (std::size_t a = 0; a < count; ++a)
            actions[s].push_back(a);
    }
    const Layout layout(std::move(actions));
    std::vector<double> p, r;
    for (StateId s = 0; s < num_states; ++s) {
        const auto row = random_distribution(rng, num_states);
        const double base = floor + (1.0 - floor) * rng.uniform();
        for (std::size_t a = 0; a < layout.num_actions(s); ++a) {
            p.insert(p.end(), row.begin(), row.end());
            r.insert(r.end(), num_states, base - gap * static_cast<double>(a));
        }
    }
    return Mdp(layout, std::move(p), std::move(r), gamma);
}

} // namespace tmdp
