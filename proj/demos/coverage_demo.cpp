#include <cstdio>

#include "raydar/raytrace.hpp"
#include "raydar/scene.hpp"

// Builds a small furnished room in code and prints its coverage summary.
int main() {
    using namespace raydar;

    scene::Scene room;
    room.name = "demo-room";
    room.bounds = {-6.0, -4.0, 6.0, 4.0};
    room.ground_material = scene::MaterialName::concrete;
    room.ceiling_height = 3.0;
    room.max_reflections = 2;
    room.objects.push_back({"cabinet", -3.0, 0.0, 2.0, 1.0, 1.5, scene::MaterialName::metal});
    room.objects.push_back({"desk", 2.5, -1.5, 0.8, 1.2, 2.0, scene::MaterialName::wood});
    room.transmitters.push_back({"ap", {0.0, 0.0, 2.9}, 0.0, 2.4e9});
    room.grid = {-5.5, -3.5, 11, 7, 1.0, 1.2};
    scene::validate(room);

    auto map = raytrace::coverage_map(room, "ap");

    int dead = 0;
    double best = 0.0;
    int best_i = 0, best_j = 0;
    bool any = false;
    for (const auto& c : map.cells) {
        if (!c.coherent_gain_db) {
            ++dead;
            continue;
        }
        if (!any || *c.coherent_gain_db > best) {
            best = *c.coherent_gain_db;
            best_i = c.i;
            best_j = c.j;
            any = true;
        }
    }

    std::printf("%s: %d x %d receiver grid, %zu cells, %d dead\n", room.name.c_str(), map.grid.nx,
                map.grid.ny, map.cells.size(), dead);
    if (any)
        std::printf("strongest cell (%d,%d) at (%.1f, %.1f): %.2f dB, %zu paths\n", best_i, best_j,
                    map.grid.center_x(best_i), map.grid.center_y(best_j), best,
                    map.at(best_i, best_j).paths.size());

    const auto& center = map.at(5, 3);
    std::printf("center cell paths:\n");
    for (const auto& p : center.paths)
        std::printf("  %zu bounces, %.3f m, |theta| %.3e, delay %.2f ns\n",
                    static_cast<std::size_t>(p.n_reflections), p.length, std::abs(p.theta),
                    p.delay * 1e9);
    return 0;
}
