#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace raydar::scene {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        return {x / n, y / n, z / n};
    }
};

class SceneError : public std::runtime_error {
public:
    explicit SceneError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class MaterialName { metal, concrete, brick, wood, glass, marble };

inline const char* to_string(MaterialName m) {
    switch (m) {
        case MaterialName::metal: return "metal";
        case MaterialName::concrete: return "concrete";
        case MaterialName::brick: return "brick";
        case MaterialName::wood: return "wood";
        case MaterialName::glass: return "glass";
        case MaterialName::marble: return "marble";
    }
    return "?";
}

inline MaterialName material_from_string(const std::string& s) {
    if (s == "metal") return MaterialName::metal;
    if (s == "concrete") return MaterialName::concrete;
    if (s == "brick") return MaterialName::brick;
    if (s == "wood") return MaterialName::wood;
    if (s == "glass") return MaterialName::glass;
    if (s == "marble") return MaterialName::marble;
    throw SceneError("unknown material '" + s + "'");
}

inline constexpr double vacuum_permittivity = 8.8541878128e-12;
inline constexpr double speed_of_light = 299792458.0;

// Perfect conductors are flagged with an infinite real permittivity.
inline bool is_pec(const std::complex<double>& eps) { return std::isinf(eps.real()); }

// eps_r and conductivity sigma = c * f_GHz^d, evaluated at the carrier frequency.
inline std::complex<double> material_properties(MaterialName m, double frequency_hz) {
    if (!(frequency_hz >= 1e9 && frequency_hz <= 1e10))
        throw SceneError("frequency outside validity window (1-10 GHz)");
    if (m == MaterialName::metal)
        return {std::numeric_limits<double>::infinity(), 0.0};
    double er = 0.0, c = 0.0, d = 0.0;
    switch (m) {
        case MaterialName::concrete: er = 5.31; c = 0.0326; d = 0.8095; break;
        case MaterialName::brick: er = 3.75; c = 0.038; d = 0.0; break;
        case MaterialName::wood: er = 1.99; c = 0.0047; d = 1.0718; break;
        case MaterialName::glass: er = 6.27; c = 0.0043; d = 1.1925; break;
        case MaterialName::marble: er = 7.074; c = 0.0055; d = 0.9262; break;
        case MaterialName::metal: break;
    }
    double f_ghz = frequency_hz / 1e9;
    double sigma = c * std::pow(f_ghz, d);
    double eps_imag = sigma / (2.0 * M_PI * frequency_hz * vacuum_permittivity);
    return {er, -eps_imag};
}

struct ObstacleBox {
    std::string id;
    double cx = 0.0, cy = 0.0;   // footprint center
    double height = 0.0;         // z extent, extruded from the ground
    double width = 0.0;          // y extent
    double length = 0.0;         // x extent
    MaterialName material = MaterialName::concrete;

    double x0() const { return cx - length / 2.0; }
    double x1() const { return cx + length / 2.0; }
    double y0() const { return cy - width / 2.0; }
    double y1() const { return cy + width / 2.0; }
};

struct TransmitterSpec {
    std::string id;
    Vec3 position;
    double power_dbm = 0.0;
    double frequency_hz = 2.4e9;
};

struct GridSpec {
    double ox = 0.0, oy = 0.0;
    int nx = 0, ny = 0;
    double cell_size = 1.0;
    double receiver_height = 1.5;

    double center_x(int i) const { return ox + (i + 0.5) * cell_size; }
    double center_y(int j) const { return oy + (j + 0.5) * cell_size; }
    bool contains_cell(int i, int j) const { return i >= 0 && i < nx && j >= 0 && j < ny; }
    // Cell whose closed-left/open-right interval holds x (and likewise y).
    std::optional<std::pair<int, int>> cell_of(double x, double y) const {
        int i = static_cast<int>(std::floor((x - ox) / cell_size));
        int j = static_cast<int>(std::floor((y - oy) / cell_size));
        if (!contains_cell(i, j)) return std::nullopt;
        return std::make_pair(i, j);
    }
};

struct Bounds {
    double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;
};

struct Scene {
    std::string name;
    Bounds bounds;
    MaterialName ground_material = MaterialName::concrete;
    std::optional<double> ceiling_height;
    int max_reflections = 2;
    std::vector<ObstacleBox> objects;
    std::vector<TransmitterSpec> transmitters;
    GridSpec grid;

    const TransmitterSpec& transmitter(const std::string& tx_id) const {
        for (const auto& t : transmitters)
            if (t.id == tx_id) return t;
        throw SceneError("unknown transmitter id '" + tx_id + "'");
    }
};

struct MoveEdit {
    std::string id;
    double cx = 0.0, cy = 0.0;
};

struct SceneOverlay {
    std::string base_scene;
    std::vector<ObstacleBox> add;
    std::vector<std::string> remove;
    std::vector<MoveEdit> move;
};

struct OccupancyGrid {
    int nx = 0, ny = 0;
    std::vector<std::uint8_t> blocked;

    bool at(int i, int j) const { return blocked[static_cast<std::size_t>(j) * nx + i] != 0; }
    void set(int i, int j, bool v) { blocked[static_cast<std::size_t>(j) * nx + i] = v ? 1 : 0; }
};

inline std::vector<std::string> validation_errors(const Scene& s) {
    std::vector<std::string> errs;
    if (s.name.empty()) errs.push_back("empty scene name");
    if (!(s.bounds.xmin < s.bounds.xmax && s.bounds.ymin < s.bounds.ymax))
        errs.push_back("bounds min must be strictly below max");
    if (s.ceiling_height && !(*s.ceiling_height > 0.0))
        errs.push_back("nonpositive ceiling height");
    if (s.max_reflections < 0) errs.push_back("negative max_reflections");
    if (s.max_reflections > 5) errs.push_back("max_reflections above the supported depth of 5");

    std::vector<std::string> seen;
    for (const auto& o : s.objects) {
        if (!(o.height > 0.0 && o.width > 0.0 && o.length > 0.0))
            errs.push_back("object '" + o.id + "': nonpositive dimension");
        if (std::find(seen.begin(), seen.end(), o.id) != seen.end())
            errs.push_back("duplicate id '" + o.id + "'");
        seen.push_back(o.id);
        if (o.x0() < s.bounds.xmin || o.x1() > s.bounds.xmax || o.y0() < s.bounds.ymin ||
            o.y1() > s.bounds.ymax)
            errs.push_back("object '" + o.id + "' out of bounds");
    }

    if (s.transmitters.empty()) errs.push_back("missing transmitter");
    seen.clear();
    for (const auto& t : s.transmitters) {
        if (std::find(seen.begin(), seen.end(), t.id) != seen.end())
            errs.push_back("duplicate id '" + t.id + "'");
        seen.push_back(t.id);
        if (t.position.x < s.bounds.xmin || t.position.x > s.bounds.xmax ||
            t.position.y < s.bounds.ymin || t.position.y > s.bounds.ymax)
            errs.push_back("transmitter '" + t.id + "' out of bounds");
        if (!(t.position.z > 0.0)) errs.push_back("transmitter '" + t.id + "' below ground");
        if (s.ceiling_height && t.position.z >= *s.ceiling_height)
            errs.push_back("transmitter '" + t.id + "' above ceiling");
        if (!(t.frequency_hz >= 1e9 && t.frequency_hz <= 1e10))
            errs.push_back("transmitter '" + t.id + "' frequency outside validity window");
    }

    const GridSpec& g = s.grid;
    if (g.nx < 1 || g.ny < 1) errs.push_back("grid must have at least one cell");
    if (!(g.cell_size > 0.0)) errs.push_back("nonpositive cell size");
    if (!(g.receiver_height > 0.0)) errs.push_back("nonpositive receiver height");
    if (s.ceiling_height && g.receiver_height >= *s.ceiling_height)
        errs.push_back("receiver height above ceiling");
    if (g.ox < s.bounds.xmin || g.ox + g.nx * g.cell_size > s.bounds.xmax ||
        g.oy < s.bounds.ymin || g.oy + g.ny * g.cell_size > s.bounds.ymax)
        errs.push_back("grid outside bounds");
    return errs;
}

inline void validate(const Scene& s) {
    auto errs = validation_errors(s);
    if (!errs.empty()) throw SceneError(errs.front());
}

namespace detail {

using nlohmann::json;

inline void require_keys(const json& j, const std::vector<std::string>& required,
                         const std::vector<std::string>& optional, const char* what) {
    for (const auto& k : required)
        if (!j.contains(k)) throw SceneError(std::string(what) + ": missing key '" + k + "'");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (std::find(required.begin(), required.end(), k) == required.end() &&
            std::find(optional.begin(), optional.end(), k) == optional.end())
            throw SceneError(std::string(what) + ": unexpected key '" + k + "'");
    }
}

inline double num(const json& j, const char* what) {
    if (!j.is_number()) throw SceneError(std::string(what) + ": expected a number");
    return j.get<double>();
}

inline std::array<double, 2> pair2(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2) throw SceneError(std::string(what) + ": expected [x, y]");
    return {num(j[0], what), num(j[1], what)};
}

inline ObstacleBox parse_box(const json& j) {
    require_keys(j, {"id", "center", "height", "width", "length", "material"}, {}, "object");
    ObstacleBox o;
    o.id = j.at("id").get<std::string>();
    auto c = pair2(j.at("center"), "object center");
    o.cx = c[0];
    o.cy = c[1];
    o.height = num(j.at("height"), "object height");
    o.width = num(j.at("width"), "object width");
    o.length = num(j.at("length"), "object length");
    o.material = material_from_string(j.at("material").get<std::string>());
    return o;
}

inline json box_to_json(const ObstacleBox& o) {
    return json{{"id", o.id},
                {"center", {o.cx, o.cy}},
                {"height", o.height},
                {"width", o.width},
                {"length", o.length},
                {"material", to_string(o.material)}};
}

inline json parse_document(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t p = 0; p + 1 < e.byte && p < text.size(); ++p) {
            if (text[p] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw SceneError(std::string(what) + ": syntax error at line " + std::to_string(line) +
                         ", column " + std::to_string(col) + ": " + e.what());
    }
}

}  // namespace detail

inline Scene parse_scene(const std::string& text, bool run_validate = true) {
    using detail::num;
    auto j = detail::parse_document(text, "scene");
    detail::require_keys(j,
                         {"name", "bounds", "ground_material", "max_reflections", "objects",
                          "transmitters", "grid"},
                         {"ceiling_height"}, "scene");
    Scene s;
    s.name = j.at("name").get<std::string>();
    detail::require_keys(j.at("bounds"), {"min", "max"}, {}, "bounds");
    auto mn = detail::pair2(j.at("bounds").at("min"), "bounds min");
    auto mx = detail::pair2(j.at("bounds").at("max"), "bounds max");
    s.bounds = {mn[0], mn[1], mx[0], mx[1]};
    s.ground_material = material_from_string(j.at("ground_material").get<std::string>());
    if (j.contains("ceiling_height")) s.ceiling_height = num(j.at("ceiling_height"), "ceiling_height");
    if (!j.at("max_reflections").is_number_integer())
        throw SceneError("max_reflections: expected an integer");
    s.max_reflections = j.at("max_reflections").get<int>();
    for (const auto& jo : j.at("objects")) s.objects.push_back(detail::parse_box(jo));
    for (const auto& jt : j.at("transmitters")) {
        detail::require_keys(jt, {"id", "position", "power_dbm", "frequency_hz"}, {}, "transmitter");
        TransmitterSpec t;
        t.id = jt.at("id").get<std::string>();
        const auto& p = jt.at("position");
        if (!p.is_array() || p.size() != 3) throw SceneError("transmitter position: expected [x, y, z]");
        t.position = {num(p[0], "position"), num(p[1], "position"), num(p[2], "position")};
        t.power_dbm = num(jt.at("power_dbm"), "power_dbm");
        t.frequency_hz = num(jt.at("frequency_hz"), "frequency_hz");
        s.transmitters.push_back(t);
    }
    const auto& jg = j.at("grid");
    detail::require_keys(jg, {"origin", "nx", "ny", "cell_size", "receiver_height"}, {}, "grid");
    auto og = detail::pair2(jg.at("origin"), "grid origin");
    s.grid.ox = og[0];
    s.grid.oy = og[1];
    if (!jg.at("nx").is_number_integer() || !jg.at("ny").is_number_integer())
        throw SceneError("grid nx/ny: expected integers");
    s.grid.nx = jg.at("nx").get<int>();
    s.grid.ny = jg.at("ny").get<int>();
    s.grid.cell_size = num(jg.at("cell_size"), "cell_size");
    s.grid.receiver_height = num(jg.at("receiver_height"), "receiver_height");
    if (run_validate) validate(s);
    return s;
}

inline std::string serialize_scene(const Scene& s) {
    nlohmann::json j;
    j["name"] = s.name;
    j["bounds"] = {{"min", {s.bounds.xmin, s.bounds.ymin}}, {"max", {s.bounds.xmax, s.bounds.ymax}}};
    j["ground_material"] = to_string(s.ground_material);
    if (s.ceiling_height) j["ceiling_height"] = *s.ceiling_height;
    j["max_reflections"] = s.max_reflections;
    j["objects"] = nlohmann::json::array();
    for (const auto& o : s.objects) j["objects"].push_back(detail::box_to_json(o));
    j["transmitters"] = nlohmann::json::array();
    for (const auto& t : s.transmitters)
        j["transmitters"].push_back({{"id", t.id},
                                     {"position", {t.position.x, t.position.y, t.position.z}},
                                     {"power_dbm", t.power_dbm},
                                     {"frequency_hz", t.frequency_hz}});
    j["grid"] = {{"origin", {s.grid.ox, s.grid.oy}},
                 {"nx", s.grid.nx},
                 {"ny", s.grid.ny},
                 {"cell_size", s.grid.cell_size},
                 {"receiver_height", s.grid.receiver_height}};
    return j.dump(2) + "\n";
}

inline SceneOverlay parse_overlay(const std::string& text) {
    auto j = detail::parse_document(text, "overlay");
    detail::require_keys(j, {"base_scene", "add", "remove", "move"}, {}, "overlay");
    SceneOverlay ov;
    ov.base_scene = j.at("base_scene").get<std::string>();
    for (const auto& jo : j.at("add")) ov.add.push_back(detail::parse_box(jo));
    for (const auto& jr : j.at("remove")) ov.remove.push_back(jr.get<std::string>());
    for (const auto& jm : j.at("move")) {
        detail::require_keys(jm, {"id", "center"}, {}, "move edit");
        auto c = detail::pair2(jm.at("center"), "move center");
        ov.move.push_back({jm.at("id").get<std::string>(), c[0], c[1]});
    }
    return ov;
}

// Edits apply in add, remove, move order; the result must validate.
inline Scene apply_overlay(const Scene& base, const SceneOverlay& ov) {
    Scene s = base;
    for (const auto& o : ov.add) s.objects.push_back(o);
    for (const auto& id : ov.remove) {
        auto it = std::find_if(s.objects.begin(), s.objects.end(),
                               [&](const ObstacleBox& o) { return o.id == id; });
        if (it == s.objects.end()) throw SceneError("overlay removes unknown id '" + id + "'");
        s.objects.erase(it);
    }
    for (const auto& m : ov.move) {
        auto it = std::find_if(s.objects.begin(), s.objects.end(),
                               [&](const ObstacleBox& o) { return o.id == m.id; });
        if (it == s.objects.end()) throw SceneError("overlay moves unknown id '" + m.id + "'");
        it->cx = m.cx;
        it->cy = m.cy;
    }
    validate(s);
    return s;
}

// Closed-rectangle test: touching edges count as blocked.
inline OccupancyGrid to_occupancy(const Scene& s) {
    OccupancyGrid occ;
    occ.nx = s.grid.nx;
    occ.ny = s.grid.ny;
    occ.blocked.assign(static_cast<std::size_t>(occ.nx) * occ.ny, 0);
    for (int j = 0; j < occ.ny; ++j) {
        double cy0 = s.grid.oy + j * s.grid.cell_size;
        double cy1 = cy0 + s.grid.cell_size;
        for (int i = 0; i < occ.nx; ++i) {
            double cx0 = s.grid.ox + i * s.grid.cell_size;
            double cx1 = cx0 + s.grid.cell_size;
            for (const auto& o : s.objects) {
                if (o.x0() <= cx1 && cx0 <= o.x1() && o.y0() <= cy1 && cy0 <= o.y1()) {
                    occ.set(i, j, true);
                    break;
                }
            }
        }
    }
    return occ;
}

// Quadrant order: Q1 southwest, Q2 northwest, Q3 northeast, Q4 southeast.
// Objects straddling a split line are clipped to each quadrant they overlap;
// grid cells go to the quadrant holding their center (split-line ties eastward/northward).
inline std::array<Scene, 4> split_quadrants(const Scene& s,
                                            const std::array<TransmitterSpec, 4>& tx) {
    double cx = (s.bounds.xmin + s.bounds.xmax) / 2.0;
    double cy = (s.bounds.ymin + s.bounds.ymax) / 2.0;
    std::array<Bounds, 4> qb = {
        Bounds{s.bounds.xmin, s.bounds.ymin, cx, cy},
        Bounds{s.bounds.xmin, cy, cx, s.bounds.ymax},
        Bounds{cx, cy, s.bounds.xmax, s.bounds.ymax},
        Bounds{cx, s.bounds.ymin, s.bounds.xmax, cy},
    };

    int isplit = 0;
    while (isplit < s.grid.nx && s.grid.center_x(isplit) < cx) ++isplit;
    int jsplit = 0;
    while (jsplit < s.grid.ny && s.grid.center_y(jsplit) < cy) ++jsplit;

    std::array<Scene, 4> out;
    for (int q = 0; q < 4; ++q) {
        Scene sub;
        sub.name = s.name + "-q" + std::to_string(q + 1);
        sub.bounds = qb[q];
        sub.ground_material = s.ground_material;
        sub.ceiling_height = s.ceiling_height;
        sub.max_reflections = s.max_reflections;

        const TransmitterSpec& t = tx[q];
        if (t.position.x < qb[q].xmin || t.position.x > qb[q].xmax || t.position.y < qb[q].ymin ||
            t.position.y > qb[q].ymax)
            throw SceneError("transmitter '" + t.id + "' outside quadrant " + std::to_string(q + 1));
        sub.transmitters = {t};

        for (const auto& o : s.objects) {
            double ox0 = std::max(o.x0(), qb[q].xmin), ox1 = std::min(o.x1(), qb[q].xmax);
            double oy0 = std::max(o.y0(), qb[q].ymin), oy1 = std::min(o.y1(), qb[q].ymax);
            if (ox0 < ox1 && oy0 < oy1) {
                ObstacleBox c = o;
                c.cx = (ox0 + ox1) / 2.0;
                c.cy = (oy0 + oy1) / 2.0;
                c.length = ox1 - ox0;
                c.width = oy1 - oy0;
                sub.objects.push_back(c);
            }
        }

        bool east = q == 2 || q == 3;
        bool north = q == 1 || q == 2;
        sub.grid = s.grid;
        sub.grid.ox = east ? s.grid.ox + isplit * s.grid.cell_size : s.grid.ox;
        sub.grid.oy = north ? s.grid.oy + jsplit * s.grid.cell_size : s.grid.oy;
        sub.grid.nx = east ? s.grid.nx - isplit : isplit;
        sub.grid.ny = north ? s.grid.ny - jsplit : jsplit;

        // Cell edges rarely align with the split line, so the cropped grid can
        // poke up to one cell past the quadrant rectangle; widen the bounds to
        // keep every receiver cell strictly inside them.
        sub.bounds.xmin = std::min(sub.bounds.xmin, sub.grid.ox);
        sub.bounds.ymin = std::min(sub.bounds.ymin, sub.grid.oy);
        sub.bounds.xmax = std::max(sub.bounds.xmax, sub.grid.ox + sub.grid.nx * s.grid.cell_size);
        sub.bounds.ymax = std::max(sub.bounds.ymax, sub.grid.oy + sub.grid.ny * s.grid.cell_size);
        out[q] = std::move(sub);
    }
    return out;
}

}  // namespace raydar::scene
