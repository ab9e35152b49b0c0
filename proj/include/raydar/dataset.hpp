#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "raydar/raytrace.hpp"

namespace raydar::dataset {

class DatasetError : public std::runtime_error {
public:
    explicit DatasetError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DatasetRow {
    double x = 0.0, y = 0.0;
    double zen_aod = 0.0, azi_aod = 0.0, zen_aoa = 0.0, azi_aoa = 0.0;
    double theta_re = 0.0, theta_im = 0.0;
    double phase = 0.0, delay = 0.0;
};

enum class Mode { per_cell, per_path };

inline constexpr const char* csv_header = "x,y,zen_aod,azi_aod,zen_aoa,azi_aoa,theta_re,theta_im,phase,delay";

namespace detail {

inline DatasetRow row_from_path(double x, double y, const raytrace::PropagationPath& p) {
    DatasetRow r;
    r.x = x;
    r.y = y;
    r.zen_aod = p.zen_aod;
    r.azi_aod = p.azi_aod;
    r.zen_aoa = p.zen_aoa;
    r.azi_aoa = p.azi_aoa;
    r.theta_re = p.theta.real();
    r.theta_im = p.theta.imag();
    r.phase = p.phase;
    r.delay = p.delay;
    return r;
}

}  // namespace detail

// Rows ordered by (j, i) row-major. per_cell carries the strongest path of
// each cell (dead cells keep their coordinates with zero RF fields); per_path
// carries every path, in the tracer's length order.
inline std::vector<DatasetRow> generate_dataset(const raytrace::CoverageMap& map, Mode mode) {
    std::vector<DatasetRow> rows;
    const auto& g = map.grid;
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const auto& cell = map.at(i, j);
            double x = g.center_x(i), y = g.center_y(j);
            if (mode == Mode::per_cell) {
                if (cell.strongest)
                    rows.push_back(detail::row_from_path(
                        x, y, cell.paths[static_cast<std::size_t>(*cell.strongest)]));
                else
                    rows.push_back(DatasetRow{x, y, 0, 0, 0, 0, 0, 0, 0, 0});
            } else {
                for (const auto& p : cell.paths) rows.push_back(detail::row_from_path(x, y, p));
            }
        }
    }
    return rows;
}

inline std::string write_csv(const std::vector<DatasetRow>& rows) {
    std::string out = csv_header;
    out += '\n';
    for (const auto& r : rows) {
        const double vals[10] = {r.x,        r.y,        r.zen_aod, r.azi_aod, r.zen_aoa,
                                 r.azi_aoa,  r.theta_re, r.theta_im, r.phase,   r.delay};
        for (int k = 0; k < 10; ++k) {
            if (k) out += ',';
            out += raytrace::detail::fmt17(vals[k]);
        }
        out += '\n';
    }
    return out;
}

inline std::vector<DatasetRow> read_csv(const std::string& text) {
    std::vector<DatasetRow> rows;
    std::size_t pos = 0, line_no = 0;
    bool saw_header = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != csv_header)
                throw DatasetError("line 1: expected header '" + std::string(csv_header) + "'");
            saw_header = true;
            continue;
        }
        double vals[10];
        const char* s = line.c_str();
        for (int k = 0; k < 10; ++k) {
            char* end = nullptr;
            vals[k] = std::strtod(s, &end);
            if (end == s)
                throw DatasetError("line " + std::to_string(line_no) + ": malformed number");
            s = end;
            if (k < 9) {
                if (*s != ',')
                    throw DatasetError("line " + std::to_string(line_no) + ": wrong column count");
                ++s;
            }
        }
        if (*s != '\0')
            throw DatasetError("line " + std::to_string(line_no) + ": wrong column count");
        rows.push_back({vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], vals[6], vals[7],
                        vals[8], vals[9]});
    }
    if (!saw_header) throw DatasetError("empty input: missing header");
    return rows;
}

struct DatasetStats {
    int nx = 0, ny = 0;
    std::size_t data_rows = 0;
    std::size_t file_bytes = 0;
};

inline DatasetStats stats(const std::vector<DatasetRow>& rows, const scene::GridSpec& grid) {
    DatasetStats st;
    st.nx = grid.nx;
    st.ny = grid.ny;
    st.data_rows = rows.size();
    st.file_bytes = write_csv(rows).size();
    return st;
}

}  // namespace raydar::dataset
