#pragma once

#include "tmdp/mdp.hpp"

#include <vector>

namespace tmdp {

/// Equality tolerance of the argmax branch (threshold <= 0).
inline constexpr double kArgmaxTolerance = 1e-9;

/// Potentially optimal actions per state, A^s(c), for one threshold c.
struct CandidateSets {
    double threshold = 0.0;
    /// Retained action labels per state, ascending.
    std::vector<std::vector<ActionId>> actions;
    /// Sum of |A^s(c)| over states with more than one available action.
    std::size_t total_count = 0;

    std::size_t size(StateId s) const { return actions.at(s).size(); }

    /// Sum of |A^s(c)| over every state.
    std::size_t total_all_states() const {
        std::size_t n = 0;
        for (const auto& list : actions)
            n += list.size();
        return n;
    }

    bool contains(StateId s, ActionId a) const {
        for (ActionId b : actions.at(s))
            if (b == a)
                return true;
        return false;
    }

    /// Action lists as a Layout, for forming the contracted MDP.
    Layout as_layout() const { return Layout(actions); }
};

/// A^s(c) from a Q-function.
///
/// For c > 0: {a : V(s) - Q(s,a) < c} with V(s) = max_a Q(s,a) (strict).
/// For c <= 0: the argmax set, ties within kArgmaxTolerance.
/// For c > 1/(1-gamma): every available action.
inline CandidateSets candidate_set(const QFunction& q, double c) {
    const Layout& layout = q.layout();
    const double bound = 1.0 / (1.0 - q.gamma());
    CandidateSets out;
    out.threshold = c;
    out.actions.resize(layout.num_states());
    for (StateId s = 0; s < layout.num_states(); ++s) {
        const auto row = q.row(s);
        const auto labels = layout.actions(s);
        const double best = q.max(s);
        auto& kept = out.actions[s];
        for (std::size_t j = 0; j < row.size(); ++j) {
            bool keep;
            if (c > bound)
                keep = true;
            else if (c > 0.0)
                keep = best - row[j] < c;
            else
                keep = best - row[j] <= kArgmaxTolerance;
            if (keep)
                kept.push_back(labels[j]);
        }
        if (layout.multi_action(s))
            out.total_count += kept.size();
    }
    return out;
}

} // namespace tmdp
