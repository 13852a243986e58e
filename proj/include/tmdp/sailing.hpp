#pragma once

// Sailing gridworld: the boat moves on a W x H grid under a wind that drifts
// between D directions. State index is (y * W + x) * D + wind.

#include "tmdp/mdp.hpp"
#include "tmdp/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <vector>

namespace tmdp {

struct SailingInstance {
    std::size_t width = 6;
    std::size_t height = 6;
    std::size_t wind_directions = 8;
    double wind_change = 0.3;
    std::size_t goal_x = 5;
    std::size_t goal_y = 5;
    double gamma = 0.95;

    void validate() const {
        if (width < 2 || height < 2)
            throw ModelError("sailing grid must be at least 2x2");
        if (wind_directions == 0)
            throw ModelError("sailing needs at least one wind direction");
        if (!(wind_change >= 0.0 && wind_change <= 1.0))
            throw ModelError("wind change probability must lie in [0,1]");
        if (goal_x >= width || goal_y >= height)
            throw ModelError("goal must lie on the grid");
        if (!(gamma > 0.0 && gamma < 1.0))
            throw ModelError("gamma must lie in (0,1)");
    }

    std::size_t num_states() const { return width * height * wind_directions; }
    StateId state(std::size_t x, std::size_t y, std::size_t wind) const {
        return (y * width + x) * wind_directions + wind;
    }
};

inline constexpr std::size_t kSailingHeadings = 8;

/// Builds the sailing model. Headings are compass points 0..7 (45 degree
/// steps, 0 = east). A move succeeds with a probability set by the angle
/// between heading and wind, jittered by up to 0.05 per cell from `seed`, and
/// otherwise the boat stays put. Entering the goal pays 1; the goal cells are
/// absorbing with a single zero-reward action.
inline Mdp make_sailing(const SailingInstance& inst, std::uint64_t seed) {
    inst.validate();
    static constexpr std::array<int, kSailingHeadings> dx{1, 1, 0, -1, -1, -1, 0, 1};
    static constexpr std::array<int, kSailingHeadings> dy{0, 1, 1, 1, 0, -1, -1, -1};
    // Indexed by angular distance (in 45 degree steps) from running downwind.
    static constexpr std::array<double, 5> speed{0.8, 1.0, 0.9, 0.6, 0.0};

    const std::size_t W = inst.width, H = inst.height, D = inst.wind_directions;
    const std::size_t n = inst.num_states();
    Rng rng(seed);
    std::vector<double> jitter(W * H);
    for (double& j : jitter)
        j = rng.uniform(-0.05, 0.05);

    auto is_goal = [&](std::size_t x, std::size_t y) { return x == inst.goal_x && y == inst.goal_y; };
    std::vector<std::vector<ActionId>> actions(n);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            for (std::size_t w = 0; w < D; ++w) {
                auto& list = actions[inst.state(x, y, w)];
                const std::size_t count = is_goal(x, y) ? 1 : kSailingHeadings;
                for (std::size_t a = 0; a < count; ++a)
                    list.push_back(a);
            }
    const Layout layout(std::move(actions));

    // Wind drift: stay, or step one direction either way.
    auto wind_next = [&](std::size_t w) {
        std::vector<std::pair<std::size_t, double>> out;
        if (D == 1) {
            out.push_back({w, 1.0});
        } else if (D == 2) {
            out.push_back({w, 1.0 - inst.wind_change});
            out.push_back({1 - w, inst.wind_change});
        } else {
            out.push_back({w, 1.0 - inst.wind_change});
            out.push_back({(w + 1) % D, inst.wind_change / 2.0});
            out.push_back({(w + D - 1) % D, inst.wind_change / 2.0});
        }
        return out;
    };

    std::vector<double> p(layout.num_pairs() * n, 0.0), r(p.size(), 0.0);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            for (std::size_t w = 0; w < D; ++w) {
                const StateId s = inst.state(x, y, w);
                if (is_goal(x, y)) {
                    p[layout.pair_index(s, 0) * n + s] = 1.0;
                    continue;
                }
                const std::size_t wind_heading = (w * kSailingHeadings) / D;
                for (std::size_t a = 0; a < kSailingHeadings; ++a) {
                    const std::size_t pair = layout.pair_index(s, a);
                    const std::size_t diff = (a + kSailingHeadings - wind_heading) % kSailingHeadings;
                    const std::size_t angle = std::min(diff, kSailingHeadings - diff);
                    double move = speed[angle] > 0.0
                                      ? std::clamp(speed[angle] + jitter[y * W + x], 0.0, 1.0)
                                      : 0.0;
                    const long nx = static_cast<long>(x) + dx[a];
                    const long ny = static_cast<long>(y) + dy[a];
                    if (nx < 0 || ny < 0 || nx >= static_cast<long>(W) || ny >= static_cast<long>(H))
                        move = 0.0;
                    for (const auto& [w2, pw] : wind_next(w)) {
                        if (move > 0.0) {
                            const StateId t = inst.state(static_cast<std::size_t>(nx),
                                                         static_cast<std::size_t>(ny), w2);
                            p[pair * n + t] += move * pw;
                            if (is_goal(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny)))
                                r[pair * n + t] = 1.0;
                        }
                        p[pair * n + inst.state(x, y, w2)] += (1.0 - move) * pw;
                    }
                }
            }
    return Mdp(layout, std::move(p), std::move(r), inst.gamma);
}

} // namespace tmdp
