#pragma once

#include "tmdp/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tmdp {

using StateId = std::size_t;
/// Action label as it appears in model files. Labels are per state.
using ActionId = std::size_t;

/// Sum-to-one tolerance for transition rows.
inline constexpr double kProbabilityTolerance = 1e-12;

/// State space and per-state action lists. Each (state, action) pair gets a
/// dense index; pairs of state s occupy a contiguous range and are ordered by
/// action label, so "lowest slot" and "lowest action label" coincide.
class Layout {
public:
    explicit Layout(std::vector<std::vector<ActionId>> actions) : actions_(std::move(actions)) {
        if (actions_.empty())
            throw ModelError("model must have at least one state");
        offsets_.reserve(actions_.size() + 1);
        offsets_.push_back(0);
        for (StateId s = 0; s < actions_.size(); ++s) {
            const auto& list = actions_[s];
            if (list.empty())
                throw ModelError("state " + std::to_string(s) + " has no available action");
            for (std::size_t j = 1; j < list.size(); ++j)
                if (list[j] <= list[j - 1])
                    throw ModelError("action labels of state " + std::to_string(s) +
                                     " must be strictly increasing");
            offsets_.push_back(offsets_.back() + list.size());
            pair_state_.insert(pair_state_.end(), list.size(), s);
        }
    }

    /// Every state gets actions 0..num_actions-1.
    static Layout uniform(std::size_t num_states, std::size_t num_actions) {
        std::vector<ActionId> list(num_actions);
        for (std::size_t a = 0; a < num_actions; ++a)
            list[a] = a;
        return Layout(std::vector<std::vector<ActionId>>(num_states, list));
    }

    std::size_t num_states() const noexcept { return actions_.size(); }
    std::size_t num_pairs() const noexcept { return offsets_.back(); }
    std::size_t num_actions(StateId s) const { return actions_.at(s).size(); }
    std::span<const ActionId> actions(StateId s) const { return actions_.at(s); }
    const std::vector<std::vector<ActionId>>& action_lists() const noexcept { return actions_; }

    std::size_t first_pair(StateId s) const { return offsets_.at(s); }
    std::size_t pair_index(StateId s, std::size_t slot) const { return offsets_[s] + slot; }
    StateId state_of_pair(std::size_t pair) const { return pair_state_.at(pair); }
    ActionId action_of_pair(std::size_t pair) const {
        const StateId s = pair_state_.at(pair);
        return actions_[s][pair - offsets_[s]];
    }

    std::optional<std::size_t> find_slot(StateId s, ActionId a) const {
        if (s >= actions_.size())
            return std::nullopt;
        const auto& list = actions_[s];
        const auto it = std::lower_bound(list.begin(), list.end(), a);
        if (it == list.end() || *it != a)
            return std::nullopt;
        return static_cast<std::size_t>(it - list.begin());
    }

    std::size_t slot_of(StateId s, ActionId a) const {
        if (auto slot = find_slot(s, a))
            return *slot;
        throw InvalidAction("action " + std::to_string(a) + " is not available at state " +
                            std::to_string(s));
    }

    std::size_t pair_of(StateId s, ActionId a) const { return pair_index(s, slot_of(s, a)); }

    /// Member of S' (more than one available action).
    bool multi_action(StateId s) const { return actions_.at(s).size() > 1; }

    std::vector<StateId> multi_action_states() const {
        std::vector<StateId> out;
        for (StateId s = 0; s < actions_.size(); ++s)
            if (actions_[s].size() > 1)
                out.push_back(s);
        return out;
    }

    /// Sum of |A^s| over S'.
    std::size_t multi_action_pairs() const {
        std::size_t n = 0;
        for (const auto& list : actions_)
            if (list.size() > 1)
                n += list.size();
        return n;
    }

    friend bool operator==(const Layout& a, const Layout& b) { return a.actions_ == b.actions_; }

private:
    std::vector<std::vector<ActionId>> actions_;
    std::vector<std::size_t> offsets_;
    std::vector<StateId> pair_state_;
};

using LayoutPtr = std::shared_ptr<const Layout>;

/// Finite discounted MDP with rewards stored per (s, a, s').
///
/// Transition and reward tables are dense: row `pair` of each table holds
/// p(.|s,a) and r(s,a,.) over all next states. The expected reward per pair
/// is precomputed for Bellman backups. Immutable after construction.
class Mdp {
public:
    Mdp(Layout layout, std::vector<double> transitions, std::vector<double> rewards, double gamma)
        : Mdp(std::make_shared<const Layout>(std::move(layout)), std::move(transitions),
              std::move(rewards), gamma) {}

    Mdp(LayoutPtr layout, std::vector<double> transitions, std::vector<double> rewards,
        double gamma)
        : layout_(std::move(layout)), transitions_(std::move(transitions)),
          rewards_(std::move(rewards)), gamma_(gamma) {
        validate();
        const std::size_t n = num_states();
        expected_reward_.resize(layout_->num_pairs());
        for (std::size_t pair = 0; pair < layout_->num_pairs(); ++pair) {
            double acc = 0.0;
            for (StateId t = 0; t < n; ++t)
                acc += transitions_[pair * n + t] * rewards_[pair * n + t];
            expected_reward_[pair] = acc;
        }
    }

    const Layout& layout() const noexcept { return *layout_; }
    const LayoutPtr& layout_ptr() const noexcept { return layout_; }
    double gamma() const noexcept { return gamma_; }
    std::size_t num_states() const noexcept { return layout_->num_states(); }
    std::size_t num_pairs() const noexcept { return layout_->num_pairs(); }

    std::span<const double> transition(std::size_t pair) const {
        return {transitions_.data() + pair * num_states(), num_states()};
    }
    std::span<const double> transition(StateId s, ActionId a) const {
        return transition(layout_->pair_of(s, a));
    }
    std::span<const double> rewards(std::size_t pair) const {
        return {rewards_.data() + pair * num_states(), num_states()};
    }
    double reward(StateId s, ActionId a, StateId next) const {
        return rewards_[layout_->pair_of(s, a) * num_states() + next];
    }
    double expected_reward(std::size_t pair) const { return expected_reward_[pair]; }

    const std::vector<double>& transition_table() const noexcept { return transitions_; }
    const std::vector<double>& reward_table() const noexcept { return rewards_; }

    /// Upper end of the value range, 1/(1-gamma).
    double value_bound() const noexcept { return 1.0 / (1.0 - gamma_); }

private:
    void validate() const {
        if (!layout_)
            throw ModelError("missing layout");
        if (!(gamma_ > 0.0 && gamma_ < 1.0))
            throw ModelError("discount factor must lie in (0,1), got " + std::to_string(gamma_));
        const std::size_t n = num_states();
        const std::size_t cells = layout_->num_pairs() * n;
        if (transitions_.size() != cells || rewards_.size() != cells)
            throw ModelError("transition/reward tables must have num_pairs * num_states entries");
        for (std::size_t pair = 0; pair < layout_->num_pairs(); ++pair) {
            double sum = 0.0;
            for (StateId t = 0; t < n; ++t) {
                const double p = transitions_[pair * n + t];
                const double r = rewards_[pair * n + t];
                if (!std::isfinite(p) || p < 0.0)
                    throw ModelError(describe(pair) + ": transition probabilities must be finite "
                                                      "and nonnegative");
                if (!std::isfinite(r) || r < 0.0 || r > 1.0)
                    throw ModelError(describe(pair) + ": reward to state " + std::to_string(t) +
                                     " must lie in [0,1]");
                sum += p;
            }
            if (std::abs(sum - 1.0) > kProbabilityTolerance)
                throw ModelError(describe(pair) + ": transition probabilities sum to " +
                                 std::to_string(sum));
        }
    }

    std::string describe(std::size_t pair) const {
        return "pair (" + std::to_string(layout_->state_of_pair(pair)) + "," +
               std::to_string(layout_->action_of_pair(pair)) + ")";
    }

    LayoutPtr layout_;
    std::vector<double> transitions_;
    std::vector<double> rewards_;
    std::vector<double> expected_reward_;
    double gamma_;
};

/// Mutable staging area for building an Mdp entry by entry.
class MdpBuilder {
public:
    MdpBuilder(Layout layout, double gamma)
        : layout_(std::make_shared<const Layout>(std::move(layout))), gamma_(gamma),
          transitions_(layout_->num_pairs() * layout_->num_states(), 0.0),
          rewards_(transitions_.size(), 0.0) {}

    const Layout& layout() const { return *layout_; }

    MdpBuilder& set_transition(StateId s, ActionId a, std::span<const double> probs) {
        const std::size_t n = layout_->num_states();
        if (probs.size() != n)
            throw ModelError("transition row must have one entry per state");
        std::copy(probs.begin(), probs.end(), transitions_.begin() + layout_->pair_of(s, a) * n);
        return *this;
    }

    MdpBuilder& set_probability(StateId s, ActionId a, StateId next, double p) {
        transitions_[layout_->pair_of(s, a) * layout_->num_states() + next] = p;
        return *this;
    }

    MdpBuilder& set_reward(StateId s, ActionId a, StateId next, double r) {
        rewards_[layout_->pair_of(s, a) * layout_->num_states() + next] = r;
        return *this;
    }

    /// Same reward for every next state of (s, a).
    MdpBuilder& set_reward(StateId s, ActionId a, double r) {
        const std::size_t n = layout_->num_states();
        const std::size_t base = layout_->pair_of(s, a) * n;
        std::fill(rewards_.begin() + base, rewards_.begin() + base + n, r);
        return *this;
    }

    Mdp build() const { return Mdp(layout_, transitions_, rewards_, gamma_); }

private:
    LayoutPtr layout_;
    double gamma_;
    std::vector<double> transitions_;
    std::vector<double> rewards_;
};

/// Real value per state.
struct ValueFunction {
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    double operator[](StateId s) const { return values[s]; }
    double& operator[](StateId s) { return values[s]; }
};

/// Real value per (state, available action), stored in pair order.
class QFunction {
public:
    QFunction(LayoutPtr layout, double gamma, std::vector<double> values)
        : layout_(std::move(layout)), gamma_(gamma), values_(std::move(values)) {
        if (values_.size() != layout_->num_pairs())
            throw ModelError("Q-function must have one entry per state-action pair");
    }

    /// All-zero Q-function on the given structure.
    static QFunction zeros(LayoutPtr layout, double gamma) {
        const std::size_t n = layout->num_pairs();
        return QFunction(std::move(layout), gamma, std::vector<double>(n, 0.0));
    }

    const Layout& layout() const noexcept { return *layout_; }
    const LayoutPtr& layout_ptr() const noexcept { return layout_; }
    double gamma() const noexcept { return gamma_; }

    std::span<const double> row(StateId s) const {
        return {values_.data() + layout_->first_pair(s), layout_->num_actions(s)};
    }
    double at(StateId s, ActionId a) const { return values_[layout_->pair_of(s, a)]; }
    double operator[](std::size_t pair) const { return values_[pair]; }
    double& operator[](std::size_t pair) { return values_[pair]; }
    const std::vector<double>& values() const noexcept { return values_; }

    double max(StateId s) const {
        const auto r = row(s);
        return *std::max_element(r.begin(), r.end());
    }

    /// Slot of the largest entry at s; lowest slot wins ties.
    std::size_t argmax_slot(StateId s) const {
        const auto r = row(s);
        std::size_t best = 0;
        for (std::size_t j = 1; j < r.size(); ++j)
            if (r[j] > r[best])
                best = j;
        return best;
    }

    ActionId argmax(StateId s) const { return layout_->actions(s)[argmax_slot(s)]; }

private:
    LayoutPtr layout_;
    double gamma_;
    std::vector<double> values_;
};

/// Deterministic policy: one action label per state.
struct Policy {
    std::vector<ActionId> actions;

    ActionId operator()(StateId s) const { return actions[s]; }
    std::size_t size() const noexcept { return actions.size(); }

    /// Throws InvalidAction unless the policy is a total map onto available actions.
    void validate(const Layout& layout) const {
        if (actions.size() != layout.num_states())
            throw InvalidAction("policy must assign an action to every state");
        for (StateId s = 0; s < actions.size(); ++s)
            layout.slot_of(s, actions[s]);
    }

    friend bool operator==(const Policy&, const Policy&) = default;
};

/// Greedy policy of q; lowest action label wins ties.
inline Policy greedy_policy(const QFunction& q) {
    Policy pi;
    pi.actions.resize(q.layout().num_states());
    for (StateId s = 0; s < pi.actions.size(); ++s)
        pi.actions[s] = q.argmax(s);
    return pi;
}

/// Throws IncompatibleModels unless both models share states, action lists and gamma.
inline void require_compatible(const Mdp& a, const Mdp& b) {
    if (!(a.layout() == b.layout()))
        throw IncompatibleModels("models differ in state space or per-state action lists");
    if (a.gamma() != b.gamma())
        throw IncompatibleModels("models differ in discount factor");
}

} // namespace tmdp
