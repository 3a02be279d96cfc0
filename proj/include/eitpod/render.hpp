#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eitpod/error.hpp"
#include "eitpod/mesh.hpp"

namespace eitpod {

struct RenderSpec {
    double color_range = 0.0;  // symmetric bound shared by all panels; <= 0 means max |value|
    int size = 320;            // panel width and height in pixels
    std::vector<int> panel_modes{1, 2, 3};  // 1-based columns of the field matrix
};

namespace detail {

// Blue (-1) through white (0) to red (+1).
inline std::string diverging_color(double t) {
    t = std::clamp(t, -1.0, 1.0);
    auto lerp = [](double a, double b, double u) { return static_cast<int>(std::lround(a + (b - a) * u)); };
    int r, g, b;
    if (t < 0.0) {
        r = lerp(255, 33, -t);
        g = lerp(255, 102, -t);
        b = lerp(255, 172, -t);
    } else {
        r = lerp(255, 178, t);
        g = lerp(255, 24, t);
        b = lerp(255, 43, t);
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

inline std::string fmt(double v, int prec = 2) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

}  // namespace detail

/// Side-by-side SVG panels, one per requested column of `fields` (M x P),
/// each element filled on a diverging scale with one range for all panels.
inline std::string render_mesh_fields_svg(const Mesh& mesh, const Eigen::MatrixXd& fields, const RenderSpec& spec) {
    detail::require(fields.rows() == static_cast<Eigen::Index>(mesh.element_count()),
                    "render: field rows must equal mesh element count");
    detail::require(spec.size > 0 && !spec.panel_modes.empty(), "render: empty render spec");
    for (int m : spec.panel_modes)
        detail::require(m >= 1 && m <= fields.cols(), "render: mode " + std::to_string(m) + " out of range");

    double range = spec.color_range;
    if (range <= 0.0)
        for (int m : spec.panel_modes) range = std::max(range, fields.col(m - 1).cwiseAbs().maxCoeff());
    if (!(range > 0.0)) range = 1.0;

    const int pad = 10, label = 24;
    const int width = static_cast<int>(spec.panel_modes.size()) * (spec.size + pad) + pad;
    const int height = spec.size + 2 * pad + 2 * label;
    const double scale = (spec.size / 2.0) / mesh.radius;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
           std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " + std::to_string(height) +
           "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t p = 0; p < spec.panel_modes.size(); ++p) {
        const int mode = spec.panel_modes[p];
        const double ox = pad + static_cast<double>(p) * (spec.size + pad) + spec.size / 2.0;
        const double oy = pad + label + spec.size / 2.0;
        svg += "<g id=\"mode" + std::to_string(mode) + "\">\n";
        svg += "<text x=\"" + detail::fmt(ox, 1) + "\" y=\"" + std::to_string(pad + 16) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">Mesh mode " +
               std::to_string(mode) + "</text>\n";
        for (std::size_t k = 0; k < mesh.element_count(); ++k) {
            const auto& t = mesh.triangles[k];
            const std::string color = detail::diverging_color(fields(static_cast<Eigen::Index>(k), mode - 1) / range);
            svg += "<polygon points=\"";
            for (int v = 0; v < 3; ++v) {
                const Point& q = mesh.nodes[t[v]];
                if (v) svg += ' ';
                // SVG y grows downwards.
                svg += detail::fmt(ox + scale * q.x) + "," + detail::fmt(oy - scale * q.y);
            }
            svg += "\" fill=\"" + color + "\" stroke=\"" + color + "\" stroke-width=\"0.3\"/>\n";
        }
        svg += "</g>\n";
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "color range: [-%.4g, %.4g]", range, range);
    svg += "<text x=\"" + std::to_string(pad) + "\" y=\"" + std::to_string(height - pad) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + buf + "</text>\n";
    svg += "</svg>\n";
    return svg;
}

}  // namespace eitpod
