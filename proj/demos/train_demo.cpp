#include <cstdio>

#include "raydar/dataset.hpp"
#include "raydar/dqn.hpp"
#include "raydar/raytrace.hpp"
#include "raydar/rlenv.hpp"
#include "raydar/scene.hpp"

// Trains a small policy across an in-code room and walks the greedy path.
int main() {
    using namespace raydar;

    scene::Scene room;
    room.name = "demo-gridworld";
    room.bounds = {-5.0, -5.0, 5.0, 5.0};
    room.ground_material = scene::MaterialName::concrete;
    room.ceiling_height = 3.0;
    room.max_reflections = 1;
    room.objects.push_back({"pillar", 0.0, 0.0, 2.5, 2.0, 2.0, scene::MaterialName::concrete});
    room.transmitters.push_back({"ap", {-4.0, 4.0, 2.8}, 0.0, 2.4e9});
    room.grid = {-4.5, -4.5, 9, 9, 1.0, 1.5};
    scene::validate(room);

    auto map = raytrace::coverage_map(room, "ap");
    auto rows = dataset::generate_dataset(map, dataset::Mode::per_cell);
    auto occ = scene::to_occupancy(room);
    rlenv::NavEnv env(room.grid, occ, rows);

    rlenv::Cell start{0, 0}, target{8, 8};
    auto oracle = rlenv::bfs_shortest(occ, start, target);
    std::printf("start (0,0) to target (8,8), shortest path %d steps\n", *oracle);

    dqn::DQNConfig cfg;
    cfg.episodes = 60;
    cfg.hidden = 32;
    cfg.seed = 1;
    dqn::TrainOptions opts;
    opts.start = start;
    opts.target = target;

    auto result = dqn::train(env, cfg, opts);
    const auto& rep = result.report;
    for (int e = 0; e < rep.episode_count(); e += 10)
        std::printf("episode %3d: %4d steps, reward %10.0f, %3d collisions\n", e,
                    rep.steps[static_cast<std::size_t>(e)],
                    rep.total_reward[static_cast<std::size_t>(e)],
                    rep.collisions[static_cast<std::size_t>(e)]);
    std::printf("best: %d steps in episode %d\n", rep.best_steps, rep.best_episode);

    auto traj = dqn::infer_path(result.best, result.norm, env, start, target, env.max_steps);
    std::printf("greedy rollout: %s in %d steps, %d collisions\n",
                traj.reached ? "reached" : "not reached", traj.steps, traj.collisions);
    std::printf("path:");
    for (const auto& p : traj.points) std::printf(" (%d,%d)", p.cell.i, p.cell.j);
    std::printf("\n");
    return 0;
}
