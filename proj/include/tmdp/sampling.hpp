#pragma once

#include "tmdp/mdp.hpp"
#include "tmdp/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <ostream>
#include <shared_mutex>
#include <span>
#include <vector>

namespace tmdp {

/// One generative-model draw.
struct Transition {
    StateId next = 0;
    double reward = 0.0;
};

/// Snapshot of the oracle's sample counters.
struct SampleBudgetReport {
    std::vector<std::uint64_t> per_pair;
    std::vector<std::uint64_t> per_state;
    std::uint64_t total = 0;

    std::uint64_t count(const Layout& layout, StateId s, ActionId a) const {
        return per_pair.at(layout.pair_of(s, a));
    }

    /// Samples drawn at the listed states.
    std::uint64_t total_over(std::span<const StateId> states) const {
        std::uint64_t n = 0;
        for (StateId s : states)
            n += per_state.at(s);
        return n;
    }
};

struct TranscriptRow {
    std::uint64_t step = 0;
    StateId state = 0;
    ActionId action = 0;
    StateId next = 0;
    double reward = 0.0;
};

/// Generative-model oracle over a hidden Mdp.
///
/// The k-th draw for pair i uses counter_uniform(seed, i, k), so each pair's
/// sequence of outcomes is independent of how calls to other pairs are
/// interleaved. Counters are atomic: concurrent calls are safe, and calls on
/// the same pair receive distinct draw indices.
class GenerativeModel {
public:
    GenerativeModel(Mdp mdp, std::uint64_t seed)
        : state_(std::make_unique<State>(std::move(mdp), seed)) {}

    GenerativeModel(GenerativeModel&&) noexcept = default;
    GenerativeModel& operator=(GenerativeModel&&) noexcept = default;

    const Layout& layout() const noexcept { return state_->mdp.layout(); }
    const LayoutPtr& layout_ptr() const noexcept { return state_->mdp.layout_ptr(); }
    double gamma() const noexcept { return state_->mdp.gamma(); }
    std::size_t num_states() const noexcept { return state_->mdp.num_states(); }
    std::uint64_t seed() const noexcept { return state_->seed; }

    Transition sample(StateId s, ActionId a) {
        State& st = *state_;
        const std::size_t pair = st.mdp.layout().pair_of(s, a);
        std::shared_lock lock(st.snapshot);
        const std::uint64_t k = st.counters[pair].fetch_add(1, std::memory_order_relaxed);
        const double u = counter_uniform(st.seed, pair, k);
        const std::size_t n = st.mdp.num_states();
        const double* cdf = st.cdf.data() + pair * n;
        // First next-state whose cumulative mass exceeds u.
        std::size_t lo = 0, hi = n - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (cdf[mid] > u)
                hi = mid;
            else
                lo = mid + 1;
        }
        const Transition out{lo, st.mdp.rewards(pair)[lo]};
        const std::uint64_t step = st.total.fetch_add(1, std::memory_order_relaxed);
        if (st.record.load(std::memory_order_relaxed)) {
            std::lock_guard guard(st.transcript_mutex);
            st.transcript.push_back({step, s, a, out.next, out.reward});
        }
        return out;
    }

    /// Consistent snapshot of all counters; does not reset them.
    SampleBudgetReport report() const {
        const State& st = *state_;
        std::unique_lock lock(st.snapshot);
        const Layout& layout = st.mdp.layout();
        SampleBudgetReport r;
        r.per_pair.resize(layout.num_pairs());
        r.per_state.assign(layout.num_states(), 0);
        for (std::size_t pair = 0; pair < r.per_pair.size(); ++pair) {
            r.per_pair[pair] = st.counters[pair].load(std::memory_order_relaxed);
            r.per_state[layout.state_of_pair(pair)] += r.per_pair[pair];
            r.total += r.per_pair[pair];
        }
        return r;
    }

    std::uint64_t total_samples() const { return state_->total.load(); }

    /// Debug transcript of every draw (off by default).
    void enable_transcript(bool on = true) { state_->record.store(on); }

    std::vector<TranscriptRow> transcript() const {
        std::lock_guard guard(state_->transcript_mutex);
        return state_->transcript;
    }

    /// CSV with header step,s,a,s',r; rows ordered by step.
    void write_transcript_csv(std::ostream& out) const {
        auto rows = transcript();
        std::sort(rows.begin(), rows.end(),
                  [](const TranscriptRow& x, const TranscriptRow& y) { return x.step < y.step; });
        out << "step,s,a,s',r\n";
        for (const auto& row : rows)
            out << row.step << ',' << row.state << ',' << row.action << ',' << row.next << ','
                << row.reward << '\n';
    }

private:
    struct State {
        State(Mdp m, std::uint64_t s)
            : mdp(std::move(m)), seed(s),
              counters(std::make_unique<std::atomic<std::uint64_t>[]>(mdp.num_pairs())),
              cdf(mdp.transition_table().size()) {
            const std::size_t n = mdp.num_states();
            for (std::size_t pair = 0; pair < mdp.num_pairs(); ++pair) {
                const auto p = mdp.transition(pair);
                double acc = 0.0;
                std::size_t last = 0;
                for (std::size_t t = 0; t < n; ++t) {
                    acc += p[t];
                    cdf[pair * n + t] = acc;
                    if (p[t] > 0.0)
                        last = t;
                }
                // Absorb rounding: u < 1 always lands on a positive-mass state.
                for (std::size_t t = last; t < n; ++t)
                    cdf[pair * n + t] = 2.0;
                counters[pair].store(0);
            }
        }

        Mdp mdp;
        std::uint64_t seed;
        std::unique_ptr<std::atomic<std::uint64_t>[]> counters;
        std::vector<double> cdf;
        std::atomic<std::uint64_t> total{0};
        mutable std::shared_mutex snapshot;
        std::atomic<bool> record{false};
        mutable std::mutex transcript_mutex;
        std::vector<TranscriptRow> transcript;
    };

    std::unique_ptr<State> state_;
};

} // namespace tmdp
