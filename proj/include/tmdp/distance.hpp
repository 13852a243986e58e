#pragma once

#include "tmdp/mdp.hpp"
#include "tmdp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace tmdp {

/// Largest L1 gap between matching transition rows.
inline double max_kernel_l1(const Mdp& m0, const Mdp& m) {
    require_compatible(m0, m);
    const auto& p0 = m0.transition_table();
    const auto& p = m.transition_table();
    const std::size_t n = m0.num_states();
    double worst = 0.0;
    for (std::size_t pair = 0; pair < m0.num_pairs(); ++pair) {
        double l1 = 0.0;
        for (std::size_t t = 0; t < n; ++t)
            l1 += std::abs(p0[pair * n + t] - p[pair * n + t]);
        worst = std::max(worst, l1);
    }
    return worst;
}

/// Sup-norm gap between reward tables over all (s, a, s').
inline double max_reward_gap(const Mdp& m0, const Mdp& m) {
    require_compatible(m0, m);
    const auto& r0 = m0.reward_table();
    const auto& r = m.reward_table();
    double worst = 0.0;
    for (std::size_t i = 0; i < r0.size(); ++i)
        worst = std::max(worst, std::abs(r0[i] - r[i]));
    return worst;
}

/// TV-distance between MDPs: the larger of the worst L1 kernel gap and the
/// sup-norm reward gap. Lies in [0, 2] for valid models.
inline double tv_distance(const Mdp& m0, const Mdp& m) {
    return std::max(max_kernel_l1(m0, m), max_reward_gap(m0, m));
}

/// Random model M with tv_distance(m0, M) <= beta, deterministic per seed.
///
/// Each transition row moves along a random zero-sum direction whose L1 norm
/// is at most beta; the result is clipped to the simplex and renormalised, and
/// the step is halved until the realised L1 change is within beta again.
/// Rewards move by at most beta and are clipped to [0, 1].
inline Mdp perturb_within_ball(const Mdp& m0, double beta, std::uint64_t seed) {
    if (!(beta > 0.0))
        throw ModelError("perturbation radius must be positive");
    Rng rng(seed);
    const std::size_t n = m0.num_states();
    std::vector<double> p = m0.transition_table();
    std::vector<double> r = m0.reward_table();
    std::vector<double> dir(n), row(n);

    for (std::size_t pair = 0; pair < m0.num_pairs(); ++pair) {
        const double* base = m0.transition_table().data() + pair * n;
        double mean = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            dir[t] = rng.uniform(-1.0, 1.0);
            mean += dir[t];
        }
        mean /= static_cast<double>(n);
        double l1 = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            dir[t] -= mean;
            l1 += std::abs(dir[t]);
        }
        const double radius = beta * (1.0 - rng.uniform());
        double scale = l1 > 0.0 ? radius / l1 : 0.0;

        bool accepted = false;
        for (int attempt = 0; attempt < 64 && scale > 0.0; ++attempt, scale *= 0.5) {
            double sum = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                row[t] = std::max(0.0, base[t] + scale * dir[t]);
                sum += row[t];
            }
            double moved = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                row[t] /= sum;
                moved += std::abs(row[t] - base[t]);
            }
            if (moved <= beta) {
                std::copy(row.begin(), row.end(), p.begin() + pair * n);
                accepted = true;
                break;
            }
        }
        if (!accepted)
            std::copy(base, base + n, p.begin() + pair * n);

        for (std::size_t t = 0; t < n; ++t) {
            double& value = r[pair * n + t];
            value = std::clamp(value + beta * rng.uniform(-1.0, 1.0), 0.0, 1.0);
        }
    }
    return Mdp(m0.layout_ptr(), std::move(p), std::move(r), m0.gamma());
}

} // namespace tmdp
