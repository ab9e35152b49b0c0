#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "raydar/dataset.hpp"
#include "raydar/dqn.hpp"
#include "raydar/raytrace.hpp"
#include "raydar/rlenv.hpp"
#include "raydar/scene.hpp"
#include "raydar/svg.hpp"

namespace {

namespace fs = std::filesystem;
using raydar::rlenv::Cell;

// Carries an already-reported exit code up to main.
struct Exit {
    int code;
};

constexpr int exit_usage = 1;
constexpr int exit_validation = 2;
constexpr int exit_runtime = 3;

std::string read_file_or_die(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "cannot open " << path << "\n";
        throw Exit{exit_usage};
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_or_die(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "cannot write " << path.string() << "\n";
        throw Exit{exit_usage};
    }
    out << content;
    if (!out) {
        std::cerr << "write failed: " << path.string() << "\n";
        throw Exit{exit_usage};
    }
}

raydar::scene::Scene load_scene(const std::string& scene_path, const std::string& overlay_path) {
    auto s = raydar::scene::parse_scene(read_file_or_die(scene_path));
    if (!overlay_path.empty()) {
        auto ov = raydar::scene::parse_overlay(read_file_or_die(overlay_path));
        s = raydar::scene::apply_overlay(s, ov);
    }
    return s;
}

Cell cell_from_world(const raydar::scene::GridSpec& grid, const std::string& what, double x,
                     double y) {
    auto c = grid.cell_of(x, y);
    if (!c) {
        std::cerr << what << " (" << x << "," << y << ") outside the receiver grid\n";
        throw Exit{exit_validation};
    }
    return {c->first, c->second};
}

std::pair<double, double> parse_xy(const std::string& text, const std::string& flag) {
    double x = 0.0, y = 0.0;
    char trailing = 0;
    if (std::sscanf(text.c_str(), "%lf,%lf%c", &x, &y, &trailing) != 2) {
        std::cerr << flag << ": expected x,y\n";
        throw Exit{exit_usage};
    }
    return {x, y};
}

std::string pick_tx(const raydar::scene::Scene& s, const std::string& requested) {
    if (!requested.empty()) return requested;
    if (s.transmitters.size() == 1) return s.transmitters[0].id;
    std::cerr << "scene has " << s.transmitters.size() << " transmitters, pick one with --tx\n";
    throw Exit{exit_usage};
}

std::vector<raydar::dataset::DatasetRow> per_cell_features(const raydar::scene::Scene& s,
                                                           const std::string& tx,
                                                           std::optional<int> max_depth) {
    auto map = raydar::raytrace::coverage_map(s, tx, max_depth);
    return raydar::dataset::generate_dataset(map, raydar::dataset::Mode::per_cell);
}

std::string episode_log_csv(const raydar::dqn::TrainReport& rep, std::uint64_t seed) {
    std::string out = "# seed=" + std::to_string(seed) + "\n";
    out += "episode,steps,total_reward,collisions,reached\n";
    for (int e = 0; e < rep.episode_count(); ++e) {
        auto k = static_cast<std::size_t>(e);
        out += std::to_string(e) + ',' + std::to_string(rep.steps[k]) + ',' +
               raydar::raytrace::detail::fmt17(rep.total_reward[k]) + ',' +
               std::to_string(rep.collisions[k]) + ',' + (rep.reached[k] ? "1" : "0") + '\n';
    }
    return out;
}

std::string trajectory_csv(const raydar::dqn::Trajectory& traj, const raydar::scene::GridSpec& grid,
                           std::uint64_t seed) {
    using raydar::raytrace::detail::fmt17;
    std::string out = "# seed=" + std::to_string(seed) + "\n";
    out += "t,x,y,action,reward,collided\n";
    for (const auto& p : traj.points) {
        out += std::to_string(p.t) + ',' + fmt17(grid.center_x(p.cell.i)) + ',' +
               fmt17(grid.center_y(p.cell.j)) + ',';
        out += p.action >= 0 ? raydar::rlenv::to_string(static_cast<raydar::rlenv::Action>(p.action))
                             : "";
        out += ',' + fmt17(p.reward) + ',' + (p.collided ? std::string("1") : std::string("0")) +
               '\n';
    }
    return out;
}

struct EpisodeLog {
    std::vector<double> steps, reward, collisions;
};

EpisodeLog parse_episode_log(const std::string& text) {
    EpisodeLog log;
    std::istringstream in(text);
    std::string line;
    bool header_seen = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "episode,steps,total_reward,collisions,reached") {
                std::cerr << "unrecognized episode log header\n";
                throw Exit{exit_validation};
            }
            header_seen = true;
            continue;
        }
        double ep = 0, st = 0, rw = 0, co = 0, re = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &ep, &st, &rw, &co, &re) != 5) {
            std::cerr << "line " << lineno << ": malformed episode log row\n";
            throw Exit{exit_validation};
        }
        log.steps.push_back(st);
        log.reward.push_back(rw);
        log.collisions.push_back(co);
    }
    if (!header_seen || log.steps.empty()) {
        std::cerr << "empty episode log\n";
        throw Exit{exit_validation};
    }
    return log;
}

int cmd_validate(const std::string& scene_path) {
    std::string text = read_file_or_die(scene_path);
    raydar::scene::Scene s;
    try {
        s = raydar::scene::parse_scene(text, false);
    } catch (const raydar::scene::SceneError& e) {
        std::cout << e.what() << "\n";
        return exit_validation;
    }
    auto errors = raydar::scene::validation_errors(s);
    for (const auto& e : errors) std::cout << e << "\n";
    if (!errors.empty()) return exit_validation;
    std::cout << "OK\n";
    return 0;
}

int cmd_coverage(const std::string& scene_path, const std::string& overlay_path,
                 const std::string& tx, const std::string& out, bool svg,
                 std::optional<int> max_depth, std::uint64_t seed) {
    auto s = load_scene(scene_path, overlay_path);
    auto map = raydar::raytrace::coverage_map(s, pick_tx(s, tx), max_depth);
    write_file_or_die(out, raydar::raytrace::coverage_csv(map));
    if (svg) {
        fs::path p(out);
        p.replace_extension(".svg");
        write_file_or_die(p, raydar::svg::heatmap(map, s.name + " coverage gain (dB)", seed));
    }
    std::size_t dead = 0;
    for (const auto& c : map.cells)
        if (c.paths.empty()) ++dead;
    std::printf("dead cells: %zu/%zu (%.1f%%)\n", dead, map.cells.size(),
                map.cells.empty() ? 0.0 : 100.0 * dead / map.cells.size());
    return 0;
}

int cmd_trace(const std::string& scene_path, const std::string& overlay_path, const std::string& tx,
              const std::string& out, const std::string& mode_name, std::optional<int> max_depth) {
    auto s = load_scene(scene_path, overlay_path);
    raydar::dataset::Mode mode;
    if (mode_name == "per-cell")
        mode = raydar::dataset::Mode::per_cell;
    else if (mode_name == "per-path")
        mode = raydar::dataset::Mode::per_path;
    else {
        std::cerr << "--mode must be per-cell or per-path\n";
        return exit_usage;
    }
    auto map = raydar::raytrace::coverage_map(s, pick_tx(s, tx), max_depth);
    auto rows = raydar::dataset::generate_dataset(map, mode);
    write_file_or_die(out, raydar::dataset::write_csv(rows));
    std::printf("grid [%d,%d], rows %zu\n", s.grid.nx, s.grid.ny, rows.size());
    return 0;
}

int cmd_train(const std::string& scene_path, const std::string& overlay_path, const std::string& tx,
              const std::string& out_dir, std::optional<int> episodes, double epsilon, double gamma,
              int hidden, const std::string& start_xy, const std::string& target_xy,
              std::optional<int> max_depth, std::uint64_t seed) {
    if (start_xy.empty() != target_xy.empty()) {
        std::cerr << "--start and --target must be given together\n";
        return exit_usage;
    }
    auto s = load_scene(scene_path, overlay_path);
    std::string tx_id = pick_tx(s, tx);
    auto rows = per_cell_features(s, tx_id, max_depth);
    auto occ = raydar::scene::to_occupancy(s);
    raydar::rlenv::NavEnv env(s.grid, occ, rows);

    raydar::dqn::DQNConfig cfg;
    cfg.epsilon = epsilon;
    cfg.gamma = gamma;
    cfg.hidden = hidden;
    cfg.seed = seed;
    cfg.episodes = episodes ? *episodes : (s.ceiling_height ? 500 : 80);

    raydar::dqn::TrainOptions opts;
    if (!start_xy.empty()) {
        auto [sx, sy] = parse_xy(start_xy, "--start");
        auto [tx_, ty_] = parse_xy(target_xy, "--target");
        opts.start = cell_from_world(s.grid, "start", sx, sy);
        opts.target = cell_from_world(s.grid, "target", tx_, ty_);
    }

    auto result = raydar::dqn::train(env, cfg, opts);

    fs::path dir(out_dir);
    write_file_or_die(dir / "checkpoint.json",
                      raydar::dqn::checkpoint_json(result.best, result.norm, cfg, opts.start,
                                                   opts.target, s.name));
    write_file_or_die(dir / "episodes.csv", episode_log_csv(result.report, seed));
    std::printf("%d in %d Episode\n", result.report.best_steps, result.report.best_episode);
    return 0;
}

int cmd_infer(const std::string& checkpoint_path, const std::string& scene_path,
              const std::string& overlay_path, const std::string& tx, const std::string& out,
              const std::string& start_xy, const std::string& target_xy, bool svg,
              std::optional<int> max_depth, std::optional<int> max_steps, std::uint64_t seed) {
    std::string cp_text = read_file_or_die(checkpoint_path);
    raydar::dqn::Checkpoint cp;
    try {
        cp = raydar::dqn::checkpoint_parse(cp_text);
    } catch (const raydar::dqn::DqnError& e) {
        std::cerr << e.what() << "\n";
        return exit_validation;
    }

    auto s = load_scene(scene_path, overlay_path);
    std::string tx_id = pick_tx(s, tx);
    auto rows = per_cell_features(s, tx_id, max_depth);
    auto occ = raydar::scene::to_occupancy(s);
    raydar::rlenv::NavEnv env(s.grid, occ, rows);

    auto [sx, sy] = parse_xy(start_xy, "--start");
    auto [tx_, ty_] = parse_xy(target_xy, "--target");
    Cell start = cell_from_world(s.grid, "start", sx, sy);
    Cell target = cell_from_world(s.grid, "target", tx_, ty_);

    raydar::dqn::QNetwork net;
    net.mlp = cp.mlp;
    int steps_cap = max_steps ? *max_steps : env.max_steps;
    auto traj = raydar::dqn::infer_path(net, cp.norm, env, start, target, steps_cap);

    write_file_or_die(out, trajectory_csv(traj, s.grid, seed));
    if (svg) {
        fs::path p(out);
        p.replace_extension(".svg");
        write_file_or_die(p, raydar::svg::trajectory_overlay(s.grid, occ, traj, target, seed));
    }
    std::printf("%s in %d steps, %d collisions\n", traj.reached ? "reached" : "not reached",
                traj.steps, traj.collisions);
    return 0;
}

int cmd_plot(const std::string& log_path, const std::string& out_dir, std::uint64_t seed) {
    auto log = parse_episode_log(read_file_or_die(log_path));
    fs::path dir(out_dir);
    write_file_or_die(dir / "reward.svg",
                      raydar::svg::line_chart("total reward per episode", "reward", log.reward, seed));
    write_file_or_die(dir / "steps.svg",
                      raydar::svg::line_chart("steps per episode", "steps", log.steps, seed));
    write_file_or_die(dir / "collisions.svg", raydar::svg::line_chart("collisions per episode",
                                                                      "collisions", log.collisions,
                                                                      seed));
    std::printf("wrote 3 charts for %zu episodes\n", log.steps.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic RF ray tracing and DQN navigation toolkit"};
    app.require_subcommand(1);

    std::string scene_path, overlay_path, tx, out, checkpoint_path, log_path;
    std::string mode_name = "per-cell", start_xy, target_xy;
    std::uint64_t seed = 7;
    double epsilon = 0.1, gamma = 0.9;
    int hidden = 128;
    std::optional<int> episodes, max_depth, max_steps;
    bool svg = false;

    auto add_common = [&](CLI::App* cmd, bool needs_scene) {
        auto* opt = cmd->add_option("--scene", scene_path, "scene JSON file");
        if (needs_scene) opt->required();
        cmd->add_option("--overlay", overlay_path, "overlay JSON applied to the scene");
        cmd->add_option("--seed", seed, "RNG seed echoed into artifacts");
        cmd->add_option("--max-depth", max_depth, "reflection depth cap (default: scene value)");
    };

    auto* validate = app.add_subcommand("validate", "check a scene file");
    validate->add_option("--scene", scene_path, "scene JSON file")->required();

    auto* coverage = app.add_subcommand("coverage", "trace the receiver grid to a coverage CSV");
    add_common(coverage, true);
    coverage->add_option("--tx", tx, "transmitter id");
    coverage->add_option("--out", out, "output CSV path")->required();
    coverage->add_flag("--svg", svg, "also write a heatmap SVG");

    auto* trace = app.add_subcommand("trace", "emit the RF feature dataset");
    add_common(trace, true);
    trace->add_option("--tx", tx, "transmitter id");
    trace->add_option("--out", out, "output CSV path")->required();
    trace->add_option("--mode", mode_name, "per-cell or per-path")
        ->check(CLI::IsMember({"per-cell", "per-path"}));

    auto* train = app.add_subcommand("train", "train the navigation policy");
    add_common(train, true);
    train->add_option("--tx", tx, "transmitter id");
    train->add_option("--out", out, "output directory")->required();
    train->add_option("--episodes", episodes, "episode count (default: 500 indoor, 80 outdoor)");
    train->add_option("--epsilon", epsilon, "exploration rate");
    train->add_option("--gamma", gamma, "discount factor");
    train->add_option("--hidden", hidden, "hidden layer width");
    train->add_option("--start", start_xy, "fixed start, world x,y");
    train->add_option("--target", target_xy, "fixed target, world x,y");

    auto* infer = app.add_subcommand("infer", "greedy rollout from a checkpoint");
    add_common(infer, true);
    infer->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
    infer->add_option("--tx", tx, "transmitter id");
    infer->add_option("--out", out, "output trajectory CSV")->required();
    infer->add_option("--start", start_xy, "start, world x,y")->required();
    infer->add_option("--target", target_xy, "target, world x,y")->required();
    infer->add_option("--max-steps", max_steps, "step cap (default: 20*(nx+ny))");
    infer->add_flag("--svg", svg, "also write a trajectory SVG");

    auto* plot = app.add_subcommand("plot", "render episode log line charts");
    plot->add_option("--log", log_path, "episode log CSV")->required();
    plot->add_option("--out", out, "output directory")->required();
    plot->add_option("--seed", seed, "RNG seed echoed into artifacts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        if (validate->parsed()) return cmd_validate(scene_path);
        if (coverage->parsed())
            return cmd_coverage(scene_path, overlay_path, tx, out, svg, max_depth, seed);
        if (trace->parsed())
            return cmd_trace(scene_path, overlay_path, tx, out, mode_name, max_depth);
        if (train->parsed())
            return cmd_train(scene_path, overlay_path, tx, out, episodes, epsilon, gamma, hidden,
                             start_xy, target_xy, max_depth, seed);
        if (infer->parsed())
            return cmd_infer(checkpoint_path, scene_path, overlay_path, tx, out, start_xy,
                             target_xy, svg, max_depth, max_steps, seed);
        if (plot->parsed()) return cmd_plot(log_path, out, seed);
    } catch (const Exit& e) {
        return e.code;
    } catch (const raydar::scene::SceneError& e) {
        std::cerr << e.what() << "\n";
        return exit_validation;
    } catch (const raydar::dataset::DatasetError& e) {
        std::cerr << e.what() << "\n";
        return exit_validation;
    } catch (const raydar::rlenv::EnvError& e) {
        std::cerr << e.what() << "\n";
        return exit_validation;
    } catch (const raydar::raytrace::TraceError& e) {
        std::cerr << e.what() << "\n";
        return exit_runtime;
    } catch (const raydar::dqn::DqnError& e) {
        std::cerr << e.what() << "\n";
        return exit_runtime;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return exit_runtime;
    }
    return 0;
}
