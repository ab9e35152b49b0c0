#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "raydar/dataset.hpp"

namespace raydar::rlenv {

class EnvError : public std::runtime_error {
public:
    explicit EnvError(const std::string& msg) : std::runtime_error(msg) {}
};

// Output-index order is fixed: 0 XMinus, 1 XPlus, 2 YMinus, 3 YPlus.
enum class Action : int { x_minus = 0, x_plus = 1, y_minus = 2, y_plus = 3 };

inline const char* to_string(Action a) {
    switch (a) {
        case Action::x_minus: return "xminus";
        case Action::x_plus: return "xplus";
        case Action::y_minus: return "yminus";
        case Action::y_plus: return "yplus";
    }
    return "?";
}

using StateVector = std::array<double, 10>;

struct Cell {
    int i = 0, j = 0;
    bool operator==(const Cell&) const = default;
};

struct StepOutcome {
    StateVector state{};
    double reward = 0.0;
    bool collided = false;
    bool reached = false;
    bool done = false;
};

// Distance terms are measured in grid cells.
inline double reward(Cell pos, Cell target, bool collided) {
    double di = target.i - pos.i, dj = target.j - pos.j;
    double r = -(di * di + dj * dj);
    if (pos == target) r += 5000.0;
    if (collided) r -= 5000.0;
    return r;
}

inline std::optional<int> bfs_shortest(const scene::OccupancyGrid& occ, Cell start, Cell target) {
    if (occ.at(start.i, start.j) || occ.at(target.i, target.j)) return std::nullopt;
    std::vector<int> dist(static_cast<std::size_t>(occ.nx) * occ.ny, -1);
    auto idx = [&](Cell c) { return static_cast<std::size_t>(c.j) * occ.nx + c.i; };
    std::deque<Cell> queue{start};
    dist[idx(start)] = 0;
    static constexpr int di[4] = {-1, 1, 0, 0};
    static constexpr int dj[4] = {0, 0, -1, 1};
    while (!queue.empty()) {
        Cell c = queue.front();
        queue.pop_front();
        if (c == target) return dist[idx(c)];
        for (int a = 0; a < 4; ++a) {
            Cell n{c.i + di[a], c.j + dj[a]};
            if (n.i < 0 || n.i >= occ.nx || n.j < 0 || n.j >= occ.ny) continue;
            if (occ.at(n.i, n.j) || dist[idx(n)] >= 0) continue;
            dist[idx(n)] = dist[idx(c)] + 1;
            queue.push_back(n);
        }
    }
    return std::nullopt;
}

// Gridworld over the occupancy grid; states are the raw per-cell feature rows
// (normalization happens on the learning side).
struct NavEnv {
    scene::GridSpec grid;
    scene::OccupancyGrid occupancy;
    std::vector<StateVector> features;  // (j, i) row-major, matching per-cell dataset order
    Cell position{}, target{};
    int step_count = 0;
    int max_steps = 0;
    std::uint64_t seed = 0;
    bool episode_done = true;

    NavEnv(const scene::GridSpec& g, const scene::OccupancyGrid& occ,
           const std::vector<dataset::DatasetRow>& rows)
        : grid(g), occupancy(occ) {
        if (rows.size() != static_cast<std::size_t>(g.nx) * g.ny)
            throw EnvError("per-cell dataset required: got " + std::to_string(rows.size()) +
                           " rows for " + std::to_string(g.nx * g.ny) + " cells");
        features.reserve(rows.size());
        for (const auto& r : rows)
            features.push_back({r.x, r.y, r.zen_aod, r.azi_aod, r.zen_aoa, r.azi_aoa, r.theta_re,
                                r.theta_im, r.phase, r.delay});
        max_steps = 20 * (g.nx + g.ny);
    }

    StateVector extract_state(Cell c) const {
        if (!grid.contains_cell(c.i, c.j))
            throw EnvError("cell (" + std::to_string(c.i) + "," + std::to_string(c.j) +
                           ") outside grid");
        return features[static_cast<std::size_t>(c.j) * grid.nx + c.i];
    }

    StateVector reset(Cell start, Cell tgt, std::uint64_t rng_seed = 0) {
        if (!grid.contains_cell(start.i, start.j) || !grid.contains_cell(tgt.i, tgt.j))
            throw EnvError("start/target outside grid");
        if (occupancy.at(start.i, start.j)) throw EnvError("start on blocked cell");
        if (occupancy.at(tgt.i, tgt.j)) throw EnvError("target on blocked cell");
        if (start == tgt) throw EnvError("start equals target");
        position = start;
        target = tgt;
        step_count = 0;
        seed = rng_seed;
        episode_done = false;
        return extract_state(position);
    }

    StepOutcome step(Action a) {
        if (episode_done) throw EnvError("step after episode end");
        static constexpr int di[4] = {-1, 1, 0, 0};
        static constexpr int dj[4] = {0, 0, -1, 1};
        int k = static_cast<int>(a);
        Cell tentative{position.i + di[k], position.j + dj[k]};
        StepOutcome out;
        bool legal = grid.contains_cell(tentative.i, tentative.j) &&
                     !occupancy.at(tentative.i, tentative.j);
        out.collided = !legal;
        if (legal) position = tentative;
        ++step_count;
        out.reached = position == target;
        out.reward = reward(position, target, out.collided);
        out.done = out.reached || step_count >= max_steps;
        out.state = extract_state(position);
        episode_done = out.done;
        return out;
    }
};

}  // namespace raydar::rlenv
