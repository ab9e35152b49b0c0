#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "raydar/scene.hpp"

namespace raydar::raytrace {

using scene::MaterialName;
using scene::Vec3;

class TraceError : public std::runtime_error {
public:
    explicit TraceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Endpoint epsilon for occlusion tests and degenerate-reflection rejection.
inline constexpr double endpoint_epsilon = 1e-9;

enum class Polarization { perpendicular, parallel };

struct Facet {
    int id = 0;
    std::array<Vec3, 4> corners{};
    Vec3 normal;
    MaterialName material = MaterialName::concrete;
    bool horizontal = false;  // horizontal facets reflect the parallel polarization

    // Axis-aligned plane: axis is the fixed coordinate, (a, b) span the other
    // two axes in x<y<z order.
    int axis = 0;
    double coord = 0.0;
    double a0 = 0.0, a1 = 0.0, b0 = 0.0, b1 = 0.0;

    double axis_of(const Vec3& p) const { return axis == 0 ? p.x : axis == 1 ? p.y : p.z; }
    std::pair<double, double> plane_of(const Vec3& p) const {
        if (axis == 0) return {p.y, p.z};
        if (axis == 1) return {p.x, p.z};
        return {p.x, p.y};
    }
    double normal_sign() const { return axis == 0 ? normal.x : axis == 1 ? normal.y : normal.z; }
    bool contains(const Vec3& p, double tol) const {
        auto [a, b] = plane_of(p);
        return a >= a0 - tol && a <= a1 + tol && b >= b0 - tol && b <= b1 + tol;
    }
    Vec3 mirror(const Vec3& p) const {
        Vec3 m = p;
        if (axis == 0)
            m.x = 2.0 * coord - p.x;
        else if (axis == 1)
            m.y = 2.0 * coord - p.y;
        else
            m.z = 2.0 * coord - p.z;
        return m;
    }
};

namespace detail {

inline Facet make_facet(int id, int axis, double coord, double a0, double a1, double b0, double b1,
                        double nsign, MaterialName mat) {
    Facet f;
    f.id = id;
    f.axis = axis;
    f.coord = coord;
    f.a0 = a0;
    f.a1 = a1;
    f.b0 = b0;
    f.b1 = b1;
    f.material = mat;
    f.horizontal = axis == 2;
    if (axis == 0) {
        f.normal = {nsign, 0.0, 0.0};
        f.corners = {Vec3{coord, a0, b0}, Vec3{coord, a1, b0}, Vec3{coord, a1, b1},
                     Vec3{coord, a0, b1}};
    } else if (axis == 1) {
        f.normal = {0.0, nsign, 0.0};
        f.corners = {Vec3{a0, coord, b0}, Vec3{a1, coord, b0}, Vec3{a1, coord, b1},
                     Vec3{a0, coord, b1}};
    } else {
        f.normal = {0.0, 0.0, nsign};
        f.corners = {Vec3{a0, b0, coord}, Vec3{a1, b0, coord}, Vec3{a1, b1, coord},
                     Vec3{a0, b1, coord}};
    }
    return f;
}

}  // namespace detail

// 4 vertical walls + top per box, then the ground plane, then the ceiling if
// the scene declares one. Normals point away from the box interior.
inline std::vector<Facet> build_facets(const scene::Scene& s) {
    std::vector<Facet> out;
    int id = 0;
    for (const auto& o : s.objects) {
        out.push_back(detail::make_facet(id++, 0, o.x0(), o.y0(), o.y1(), 0.0, o.height, -1.0, o.material));
        out.push_back(detail::make_facet(id++, 0, o.x1(), o.y0(), o.y1(), 0.0, o.height, +1.0, o.material));
        out.push_back(detail::make_facet(id++, 1, o.y0(), o.x0(), o.x1(), 0.0, o.height, -1.0, o.material));
        out.push_back(detail::make_facet(id++, 1, o.y1(), o.x0(), o.x1(), 0.0, o.height, +1.0, o.material));
        out.push_back(detail::make_facet(id++, 2, o.height, o.x0(), o.x1(), o.y0(), o.y1(), +1.0, o.material));
    }
    const auto& b = s.bounds;
    out.push_back(detail::make_facet(id++, 2, 0.0, b.xmin, b.xmax, b.ymin, b.ymax, +1.0, s.ground_material));
    if (s.ceiling_height)
        out.push_back(detail::make_facet(id++, 2, *s.ceiling_height, b.xmin, b.xmax, b.ymin, b.ymax,
                                         -1.0, s.ground_material));
    return out;
}

struct ImageNode {
    Vec3 point;
    int facet = -1;
    int parent = -1;  // -1 means the child of the tree root
    int depth = 1;
};

struct ImageTree {
    Vec3 root;
    std::vector<ImageNode> nodes;
};

// Breadth-first image enumeration to depth rho; the only structural prune is
// the consecutive same-facet mirror, which can never validate.
inline ImageTree build_image_tree(const Vec3& tx, const std::vector<Facet>& facets, int rho) {
    ImageTree tree;
    tree.root = tx;
    if (rho <= 0) return tree;
    if (rho > 16) throw TraceError("max reflection depth above 16 is not supported");
    std::size_t level_begin = 0, level_end = 0;
    for (const auto& f : facets)
        tree.nodes.push_back({f.mirror(tx), f.id, -1, 1});
    level_end = tree.nodes.size();
    for (int depth = 2; depth <= rho; ++depth) {
        for (std::size_t p = level_begin; p < level_end; ++p) {
            for (const auto& f : facets) {
                if (f.id == tree.nodes[p].facet) continue;
                tree.nodes.push_back({f.mirror(tree.nodes[p].point), f.id, static_cast<int>(p), depth});
            }
        }
        level_begin = level_end;
        level_end = tree.nodes.size();
    }
    return tree;
}

struct PropagationPath {
    std::vector<Vec3> vertices;      // tx, reflection points..., rx
    std::vector<int> facet_ids;      // bounce facets in tx-to-rx order
    double length = 0.0;
    std::complex<double> theta{0.0, 0.0};
    double phase = 0.0;
    double delay = 0.0;
    double zen_aod = 0.0, azi_aod = 0.0;
    double zen_aoa = 0.0, azi_aoa = 0.0;
    int n_reflections = 0;
};

namespace detail {

// True when the open segment a->b (endpoints trimmed by endpoint_epsilon
// meters) passes through any facet rectangle.
inline bool segment_occluded(const Vec3& a, const Vec3& b, const std::vector<Facet>& facets) {
    Vec3 d = b - a;
    double len = d.norm();
    if (len <= 2.0 * endpoint_epsilon) return false;
    double t_lo = endpoint_epsilon / len;
    double t_hi = 1.0 - t_lo;
    for (const auto& f : facets) {
        double da = f.axis_of(a), db = f.axis_of(b);
        double denom = db - da;
        if (std::abs(denom) < 1e-15) continue;  // parallel to the plane
        double t = (f.coord - da) / denom;
        if (t <= t_lo || t >= t_hi) continue;
        Vec3 p = a + d * t;
        if (f.contains(p, endpoint_epsilon)) return true;
    }
    return false;
}

inline bool front_side(const Facet& f, const Vec3& p) {
    return (f.axis_of(p) - f.coord) * f.normal_sign() > 1e-12;
}

}  // namespace detail

// Unfolds every tree node against the receiver, keeping paths whose reflection
// points land on their facets and whose segments are unoccluded. Geometry only;
// path_coefficient fills the channel quantities. Sorted by length ascending.
inline std::vector<PropagationPath> trace_paths(const ImageTree& tree,
                                                const std::vector<Facet>& facets, const Vec3& rx) {
    std::vector<PropagationPath> out;

    if (!detail::segment_occluded(tree.root, rx, facets)) {
        PropagationPath p;
        p.vertices = {tree.root, rx};
        p.length = (rx - tree.root).norm();
        p.n_reflections = 0;
        out.push_back(std::move(p));
    }

    std::array<int, 16> chain{};
    for (std::size_t ni = 0; ni < tree.nodes.size(); ++ni) {
        const ImageNode& node = tree.nodes[ni];
        int depth = node.depth;
        int c = static_cast<int>(ni);
        for (int k = depth - 1; k >= 0; --k) {
            chain[k] = c;
            c = tree.nodes[c].parent;
        }

        // Walk rx back toward the transmitter, peeling one image per bounce.
        std::array<Vec3, 16> rpts;
        Vec3 cur = rx;
        bool ok = true;
        for (int k = depth - 1; k >= 0 && ok; --k) {
            const ImageNode& img = tree.nodes[chain[k]];
            const Facet& f = facets[img.facet];
            if (!detail::front_side(f, cur)) {
                ok = false;
                break;
            }
            double dcur = f.axis_of(cur), dimg = f.axis_of(img.point);
            double denom = dimg - dcur;
            if (std::abs(denom) < 1e-15) {
                ok = false;
                break;
            }
            double t = (f.coord - dcur) / denom;
            Vec3 seg = img.point - cur;
            double seg_len = seg.norm();
            if (!(t > 0.0 && t < 1.0) || t * seg_len < endpoint_epsilon ||
                (1.0 - t) * seg_len < endpoint_epsilon) {
                ok = false;
                break;
            }
            Vec3 hit = cur + seg * t;
            if (!f.contains(hit, endpoint_epsilon)) {
                ok = false;
                break;
            }
            rpts[k] = hit;
            cur = hit;
        }
        if (!ok) continue;
        if (!detail::front_side(facets[tree.nodes[chain[0]].facet], tree.root)) continue;

        PropagationPath p;
        p.vertices.reserve(depth + 2);
        p.vertices.push_back(tree.root);
        for (int k = 0; k < depth; ++k) p.vertices.push_back(rpts[k]);
        p.vertices.push_back(rx);
        for (int k = 0; k < depth; ++k) p.facet_ids.push_back(tree.nodes[chain[k]].facet);

        bool blocked = false;
        for (std::size_t v = 0; v + 1 < p.vertices.size() && !blocked; ++v)
            blocked = detail::segment_occluded(p.vertices[v], p.vertices[v + 1], facets);
        if (blocked) continue;

        // The unfolded straight-line distance is the exact path length.
        p.length = (rx - node.point).norm();
        p.n_reflections = depth;
        out.push_back(std::move(p));
    }

    std::stable_sort(out.begin(), out.end(),
                     [](const PropagationPath& a, const PropagationPath& b) { return a.length < b.length; });
    return out;
}

// Standard Fresnel coefficients for complex relative permittivity, incidence
// angle measured from the facet normal. Perfect conductors pin the magnitudes.
inline std::complex<double> fresnel_gamma(const std::complex<double>& eps, double angle,
                                          Polarization pol) {
    if (scene::is_pec(eps)) return pol == Polarization::perpendicular ? -1.0 : 1.0;
    double c = std::cos(angle);
    double s2 = std::sin(angle);
    s2 *= s2;
    std::complex<double> root = std::sqrt(eps - s2);
    if (pol == Polarization::perpendicular) return (c - root) / (c + root);
    return (eps * c - root) / (eps * c + root);
}

inline PropagationPath path_coefficient(PropagationPath path, double frequency_hz,
                                        const std::vector<Facet>& facets) {
    double lambda = scene::speed_of_light / frequency_hz;
    std::complex<double> gamma_product = 1.0;
    for (int k = 0; k < path.n_reflections; ++k) {
        const Facet& f = facets[path.facet_ids[k]];
        Vec3 incident = (path.vertices[k + 1] - path.vertices[k]).normalized();
        double cos_i = std::min(1.0, std::abs(incident.dot(f.normal)));
        double angle = std::acos(cos_i);
        auto eps = scene::material_properties(f.material, frequency_hz);
        auto pol = f.horizontal ? Polarization::parallel : Polarization::perpendicular;
        gamma_product *= fresnel_gamma(eps, angle, pol);
    }
    double d = path.length;
    std::complex<double> spiral = std::polar(1.0, -2.0 * M_PI * d / lambda);
    path.theta = (lambda / (4.0 * M_PI * d)) * gamma_product * spiral;
    path.phase = std::arg(path.theta);
    if (path.phase < 0.0) path.phase += 2.0 * M_PI;
    if (path.phase >= 2.0 * M_PI) path.phase = 0.0;
    path.delay = d / scene::speed_of_light;

    Vec3 dep = (path.vertices[1] - path.vertices[0]).normalized();
    path.zen_aod = std::acos(std::clamp(dep.z, -1.0, 1.0));
    path.azi_aod = std::atan2(dep.y, dep.x);
    std::size_t n = path.vertices.size();
    Vec3 arr = (path.vertices[n - 2] - path.vertices[n - 1]).normalized();
    path.zen_aoa = std::acos(std::clamp(arr.z, -1.0, 1.0));
    path.azi_aoa = std::atan2(arr.y, arr.x);
    return path;
}

// Caches facets and the image tree for one transmitter so receiver moves only
// redo path validation and coefficients. Immutable after construction; safe to
// call move_receiver concurrently.
struct Tracer {
    const scene::Scene* sc = nullptr;
    scene::TransmitterSpec tx;
    std::vector<Facet> facets;
    ImageTree tree;

    Tracer() = default;
    Tracer(const scene::Scene& s, const std::string& tx_id, std::optional<int> max_depth = {}) {
        sc = &s;
        tx = s.transmitter(tx_id);
        facets = build_facets(s);
        tree = build_image_tree(tx.position, facets, max_depth.value_or(s.max_reflections));
    }

    void check_receiver(const Vec3& rx) const {
        const auto& b = sc->bounds;
        if (!(rx.x > b.xmin && rx.x < b.xmax && rx.y > b.ymin && rx.y < b.ymax))
            throw TraceError("receiver outside scene bounds");
        for (const auto& o : sc->objects)
            if (rx.x >= o.x0() && rx.x <= o.x1() && rx.y >= o.y0() && rx.y <= o.y1() &&
                rx.z <= o.height)
                throw TraceError("receiver inside obstacle '" + o.id + "'");
    }

    std::vector<PropagationPath> move_receiver(const Vec3& rx) const {
        check_receiver(rx);
        auto paths = trace_paths(tree, facets, rx);
        for (auto& p : paths) p = path_coefficient(std::move(p), tx.frequency_hz, facets);
        return paths;
    }
};

struct CellRecord {
    int i = 0, j = 0;
    std::vector<PropagationPath> paths;
    std::optional<double> coherent_gain_db;
    std::optional<int> strongest;
};

struct CoverageMap {
    scene::GridSpec grid;
    std::vector<CellRecord> cells;  // i-major: cells[i * ny + j]

    const CellRecord& at(int i, int j) const { return cells[static_cast<std::size_t>(i) * grid.ny + j]; }
};

namespace detail {

inline int worker_count(std::size_t n_cells) {
    unsigned n = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("RAYDAR_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = static_cast<unsigned>(v);
    }
    if (n < 1) n = 1;
    if (n > n_cells) n = static_cast<unsigned>(n_cells == 0 ? 1 : n_cells);
    return static_cast<int>(n);
}

inline bool point_in_obstacle(const scene::Scene& s, const Vec3& p) {
    for (const auto& o : s.objects)
        if (p.x >= o.x0() && p.x <= o.x1() && p.y >= o.y0() && p.y <= o.y1() && p.z <= o.height)
            return true;
    return false;
}

}  // namespace detail

// Per-cell multipath trace over the receiver grid. Cells are statically
// partitioned over workers and written to disjoint slots, so the result is
// independent of RAYDAR_THREADS.
inline CoverageMap coverage_map(const scene::Scene& s, const std::string& tx_id,
                                std::optional<int> max_depth = {}) {
    Tracer tracer(s, tx_id, max_depth);
    CoverageMap map;
    map.grid = s.grid;
    std::size_t n_cells = static_cast<std::size_t>(s.grid.nx) * s.grid.ny;
    map.cells.resize(n_cells);

    auto run_cell = [&](std::size_t idx) {
        int i = static_cast<int>(idx) / s.grid.ny;
        int j = static_cast<int>(idx) % s.grid.ny;
        CellRecord& rec = map.cells[idx];
        rec.i = i;
        rec.j = j;
        Vec3 rx{s.grid.center_x(i), s.grid.center_y(j), s.grid.receiver_height};
        if (detail::point_in_obstacle(s, rx)) return;
        rec.paths = tracer.move_receiver(rx);
        if (rec.paths.empty()) return;
        std::complex<double> sum = 0.0;
        double best = -1.0;
        for (std::size_t k = 0; k < rec.paths.size(); ++k) {
            sum += rec.paths[k].theta;
            double mag = std::abs(rec.paths[k].theta);
            if (mag > best) {
                best = mag;
                rec.strongest = static_cast<int>(k);
            }
        }
        rec.coherent_gain_db = 10.0 * std::log10(std::norm(sum)) + tracer.tx.power_dbm;
    };

    int workers = detail::worker_count(n_cells);
    if (workers <= 1) {
        for (std::size_t idx = 0; idx < n_cells; ++idx) run_cell(idx);
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (n_cells + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            std::size_t lo = w * chunk;
            std::size_t hi = std::min(n_cells, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi] {
                for (std::size_t idx = lo; idx < hi; ++idx) run_cell(idx);
            });
        }
        for (auto& t : pool) t.join();
    }
    return map;
}

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline std::string coverage_csv(const CoverageMap& map) {
    std::string out = "i,j,x,y,n_paths,gain_db,strongest_theta_re,strongest_theta_im\n";
    for (const auto& c : map.cells) {
        out += std::to_string(c.i) + ',' + std::to_string(c.j) + ',';
        out += detail::fmt17(map.grid.center_x(c.i)) + ',' + detail::fmt17(map.grid.center_y(c.j)) + ',';
        out += std::to_string(c.paths.size()) + ',';
        if (c.coherent_gain_db) {
            const auto& strongest = c.paths[static_cast<std::size_t>(*c.strongest)];
            out += detail::fmt17(*c.coherent_gain_db) + ',';
            out += detail::fmt17(strongest.theta.real()) + ',';
            out += detail::fmt17(strongest.theta.imag());
        } else {
            out += ",,";
        }
        out += '\n';
    }
    return out;
}

}  // namespace raydar::raytrace
