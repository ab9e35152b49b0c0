#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "raydar/dqn.hpp"

namespace raydar::svg {

namespace detail {

inline std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string fmtg(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '&')
            out += "&amp;";
        else if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else
            out += c;
    }
    return out;
}

// Four-stop linear ramp, deep blue through cyan and yellow to red.
inline std::string ramp_color(double t) {
    static constexpr double stops[4][4] = {{0.0, 0, 32, 160},
                                           {1.0 / 3.0, 0, 160, 224},
                                           {2.0 / 3.0, 240, 208, 0},
                                           {1.0, 208, 16, 16}};
    t = std::clamp(t, 0.0, 1.0);
    int k = 0;
    while (k < 2 && t > stops[k + 1][0]) ++k;
    double u = (t - stops[k][0]) / (stops[k + 1][0] - stops[k][0]);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "rgb(%d,%d,%d)",
                  static_cast<int>(std::lround(stops[k][1] + u * (stops[k + 1][1] - stops[k][1]))),
                  static_cast<int>(std::lround(stops[k][2] + u * (stops[k + 1][2] - stops[k][2]))),
                  static_cast<int>(std::lround(stops[k][3] + u * (stops[k + 1][3] - stops[k][3]))));
    return buf;
}

inline std::string open_tag(int width, int height, std::uint64_t seed) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                    "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
                    std::to_string(width) + " " + std::to_string(height) + "\">\n";
    s += "<!-- seed=" + std::to_string(seed) + " -->\n";
    return s;
}

inline int cell_pixels(int nx, int ny) {
    int n = std::max(nx, ny);
    return std::clamp(960 / std::max(n, 1), 2, 24);
}

}  // namespace detail

// Gain heatmap on the receiver grid; cells no path reaches stay white.
inline std::string heatmap(const raytrace::CoverageMap& map, const std::string& title,
                           std::uint64_t seed) {
    const auto& g = map.grid;
    int px = detail::cell_pixels(g.nx, g.ny);
    int ml = 16, mt = 36, legend_w = 70;
    int width = ml + g.nx * px + 16 + legend_w;
    int height = mt + g.ny * px + 16;

    double gmin = 0.0, gmax = 0.0;
    bool any = false;
    for (const auto& c : map.cells) {
        if (!c.coherent_gain_db) continue;
        if (!any) {
            gmin = gmax = *c.coherent_gain_db;
            any = true;
        } else {
            gmin = std::min(gmin, *c.coherent_gain_db);
            gmax = std::max(gmax, *c.coherent_gain_db);
        }
    }
    double span = gmax - gmin;

    std::string s = detail::open_tag(width, height, seed);
    s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" fill=\"#ffffff\"/>\n";
    s += "<text x=\"" + std::to_string(ml) + "\" y=\"22\" font-family=\"monospace\" font-size=\"14\">" +
         detail::escape(title) + "</text>\n";

    for (int i = 0; i < g.nx; ++i) {
        for (int j = 0; j < g.ny; ++j) {
            const auto& c = map.at(i, j);
            std::string fill = "#ffffff";
            if (c.coherent_gain_db) {
                double t = span > 0.0 ? (*c.coherent_gain_db - gmin) / span : 0.5;
                fill = detail::ramp_color(t);
            }
            int x = ml + i * px;
            int y = mt + (g.ny - 1 - j) * px;
            s += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
                 std::to_string(px) + "\" height=\"" + std::to_string(px) + "\" fill=\"" + fill +
                 "\"/>\n";
        }
    }
    s += "<rect x=\"" + std::to_string(ml) + "\" y=\"" + std::to_string(mt) + "\" width=\"" +
         std::to_string(g.nx * px) + "\" height=\"" + std::to_string(g.ny * px) +
         "\" fill=\"none\" stroke=\"#404040\"/>\n";

    int lx = ml + g.nx * px + 16;
    int lh = std::max(g.ny * px, 64);
    if (any) {
        int bands = 48;
        for (int k = 0; k < bands; ++k) {
            double t = 1.0 - static_cast<double>(k) / (bands - 1);
            int y0 = mt + k * lh / bands;
            int y1 = mt + (k + 1) * lh / bands;
            s += "<rect x=\"" + std::to_string(lx) + "\" y=\"" + std::to_string(y0) +
                 "\" width=\"12\" height=\"" + std::to_string(std::max(y1 - y0, 1)) + "\" fill=\"" +
                 detail::ramp_color(t) + "\"/>\n";
        }
        s += "<text x=\"" + std::to_string(lx + 16) + "\" y=\"" + std::to_string(mt + 10) +
             "\" font-family=\"monospace\" font-size=\"11\">" + detail::fmt2(gmax) + " dB</text>\n";
        s += "<text x=\"" + std::to_string(lx + 16) + "\" y=\"" + std::to_string(mt + lh) +
             "\" font-family=\"monospace\" font-size=\"11\">" + detail::fmt2(gmin) + " dB</text>\n";
    }
    s += "</svg>\n";
    return s;
}

// One metric against episode index.
inline std::string line_chart(const std::string& title, const std::string& y_label,
                              const std::vector<double>& values, std::uint64_t seed) {
    int width = 720, height = 260;
    int ml = 64, mr = 16, mt = 32, mb = 36;
    int pw = width - ml - mr, ph = height - mt - mb;
    int n = static_cast<int>(values.size());

    double vmin = values.empty() ? 0.0 : values[0], vmax = vmin;
    for (double v : values) {
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    if (vmax == vmin) {
        vmin -= 1.0;
        vmax += 1.0;
    }

    auto xpos = [&](int i) {
        return ml + (n > 1 ? static_cast<double>(i) * pw / (n - 1) : pw * 0.5);
    };
    auto ypos = [&](double v) { return mt + (vmax - v) / (vmax - vmin) * ph; };

    std::string s = detail::open_tag(width, height, seed);
    s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" fill=\"#ffffff\"/>\n";
    s += "<text x=\"" + std::to_string(ml) + "\" y=\"20\" font-family=\"monospace\" font-size=\"13\">" +
         detail::escape(title) + "</text>\n";
    s += "<rect x=\"" + std::to_string(ml) + "\" y=\"" + std::to_string(mt) + "\" width=\"" +
         std::to_string(pw) + "\" height=\"" + std::to_string(ph) +
         "\" fill=\"none\" stroke=\"#404040\"/>\n";

    for (int k = 0; k < 3; ++k) {
        double v = vmin + (vmax - vmin) * k / 2.0;
        double y = ypos(v);
        s += "<line x1=\"" + std::to_string(ml - 4) + "\" y1=\"" + detail::fmt2(y) + "\" x2=\"" +
             std::to_string(ml) + "\" y2=\"" + detail::fmt2(y) + "\" stroke=\"#404040\"/>\n";
        s += "<text x=\"" + std::to_string(ml - 8) + "\" y=\"" + detail::fmt2(y + 4) +
             "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">" + detail::fmtg(v) +
             "</text>\n";
    }
    s += "<text x=\"" + std::to_string(ml) + "\" y=\"" + std::to_string(height - 10) +
         "\" font-family=\"monospace\" font-size=\"10\">episode 0</text>\n";
    if (n > 1)
        s += "<text x=\"" + std::to_string(ml + pw) + "\" y=\"" + std::to_string(height - 10) +
             "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">" +
             std::to_string(n - 1) + "</text>\n";
    s += "<text x=\"14\" y=\"" + std::to_string(mt + ph / 2) +
         "\" font-family=\"monospace\" font-size=\"10\" transform=\"rotate(-90 14 " +
         std::to_string(mt + ph / 2) + ")\" text-anchor=\"middle\">" + detail::escape(y_label) +
         "</text>\n";

    if (n == 1) {
        s += "<circle cx=\"" + detail::fmt2(xpos(0)) + "\" cy=\"" + detail::fmt2(ypos(values[0])) +
             "\" r=\"3\" fill=\"#0a62a8\"/>\n";
    } else if (n > 1) {
        s += "<polyline fill=\"none\" stroke=\"#0a62a8\" stroke-width=\"1.5\" points=\"";
        for (int i = 0; i < n; ++i) {
            if (i) s += " ";
            s += detail::fmt2(xpos(i)) + "," + detail::fmt2(ypos(values[static_cast<std::size_t>(i)]));
        }
        s += "\"/>\n";
    }
    s += "</svg>\n";
    return s;
}

// Occupancy grid with the rollout drawn through cell centers.
inline std::string trajectory_overlay(const scene::GridSpec& g, const scene::OccupancyGrid& occ,
                                      const dqn::Trajectory& traj, rlenv::Cell target,
                                      std::uint64_t seed) {
    int px = detail::cell_pixels(g.nx, g.ny);
    int ml = 16, mt = 36;
    int width = ml + g.nx * px + 16;
    int height = mt + g.ny * px + 16;

    auto cx = [&](int i) { return ml + i * px + px * 0.5; };
    auto cy = [&](int j) { return mt + (g.ny - 1 - j) * px + px * 0.5; };

    std::string s = detail::open_tag(width, height, seed);
    s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" fill=\"#ffffff\"/>\n";
    std::string label = traj.reached ? "reached in " + std::to_string(traj.steps) + " steps"
                                     : "not reached after " + std::to_string(traj.steps) + " steps";
    s += "<text x=\"" + std::to_string(ml) + "\" y=\"22\" font-family=\"monospace\" font-size=\"13\">" +
         label + ", " + std::to_string(traj.collisions) + " collisions</text>\n";

    bool strokes = px >= 6;
    for (int i = 0; i < g.nx; ++i) {
        for (int j = 0; j < g.ny; ++j) {
            int x = ml + i * px;
            int y = mt + (g.ny - 1 - j) * px;
            s += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
                 std::to_string(px) + "\" height=\"" + std::to_string(px) + "\" fill=\"" +
                 (occ.at(i, j) ? "#4a4a4a" : "#f7f7f7") + "\"" +
                 (strokes ? " stroke=\"#dddddd\"" : "") + "/>\n";
        }
    }
    s += "<rect x=\"" + std::to_string(ml) + "\" y=\"" + std::to_string(mt) + "\" width=\"" +
         std::to_string(g.nx * px) + "\" height=\"" + std::to_string(g.ny * px) +
         "\" fill=\"none\" stroke=\"#404040\"/>\n";

    if (traj.points.size() > 1) {
        s += "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"" +
             detail::fmt2(std::max(px * 0.18, 1.5)) + "\" points=\"";
        for (std::size_t k = 0; k < traj.points.size(); ++k) {
            if (k) s += " ";
            s += detail::fmt2(cx(traj.points[k].cell.i)) + "," + detail::fmt2(cy(traj.points[k].cell.j));
        }
        s += "\"/>\n";
    }
    for (const auto& p : traj.points)
        if (p.collided)
            s += "<circle cx=\"" + detail::fmt2(cx(p.cell.i)) + "\" cy=\"" + detail::fmt2(cy(p.cell.j)) +
                 "\" r=\"" + detail::fmt2(std::max(px * 0.16, 1.5)) + "\" fill=\"#ff7f0e\"/>\n";

    const auto& start = traj.points.front().cell;
    s += "<circle cx=\"" + detail::fmt2(cx(start.i)) + "\" cy=\"" + detail::fmt2(cy(start.j)) +
         "\" r=\"" + detail::fmt2(std::max(px * 0.3, 2.5)) + "\" fill=\"#2ca02c\"/>\n";
    s += "<circle cx=\"" + detail::fmt2(cx(target.i)) + "\" cy=\"" + detail::fmt2(cy(target.j)) +
         "\" r=\"" + detail::fmt2(std::max(px * 0.3, 2.5)) +
         "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"" + detail::fmt2(std::max(px * 0.12, 1.5)) +
         "\"/>\n";
    s += "</svg>\n";
    return s;
}

}  // namespace raydar::svg
