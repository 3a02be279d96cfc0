#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eitpod/error.hpp"
#include "eitpod/hash.hpp"

namespace eitpod {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

using Triangle = std::array<int, 3>;

/// Triangulated disk centred at the origin.
///
/// Nodes are stored ring by ring from the centre outwards; `boundary` lists the
/// outermost ring counterclockwise starting at angle 0.
struct Mesh {
    double radius = 1.0;
    std::vector<Point> nodes;
    std::vector<Triangle> triangles;
    std::vector<int> boundary;

    std::size_t element_count() const { return triangles.size(); }
    std::size_t node_count() const { return nodes.size(); }

    double signed_area(std::size_t k) const {
        const auto& t = triangles[k];
        const Point& a = nodes[t[0]];
        const Point& b = nodes[t[1]];
        const Point& c = nodes[t[2]];
        return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
    }

    Point centroid(std::size_t k) const {
        const auto& t = triangles[k];
        return {(nodes[t[0]].x + nodes[t[1]].x + nodes[t[2]].x) / 3.0,
                (nodes[t[0]].y + nodes[t[1]].y + nodes[t[2]].y) / 3.0};
    }

    double total_area() const {
        double s = 0.0;
        for (std::size_t k = 0; k < triangles.size(); ++k) s += signed_area(k);
        return s;
    }
};

inline bool operator==(const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }

inline bool operator==(const Mesh& a, const Mesh& b) {
    return a.radius == b.radius && a.nodes == b.nodes && a.triangles == b.triangles &&
           a.boundary == b.boundary;
}

/// Throws DataError if any Mesh invariant is broken. Used on meshes read from disk.
inline void validate(const Mesh& mesh) {
    if (!(mesh.radius > 0.0)) throw DataError("mesh: radius must be positive");
    if (mesh.triangles.empty()) throw DataError("mesh: no triangles");
    const auto n = static_cast<int>(mesh.nodes.size());
    std::vector<char> used(mesh.nodes.size(), 0);
    for (std::size_t k = 0; k < mesh.triangles.size(); ++k) {
        for (int v : mesh.triangles[k]) {
            if (v < 0 || v >= n) throw DataError("mesh: triangle references missing node");
            used[v] = 1;
        }
        if (!(mesh.signed_area(k) > 0.0))
            throw DataError("mesh: triangle " + std::to_string(k) + " is not counterclockwise");
    }
    if (std::find(used.begin(), used.end(), 0) != used.end())
        throw DataError("mesh: orphan node");
    if (mesh.boundary.size() < 3) throw DataError("mesh: boundary too short");
    double prev = -1.0;
    for (int b : mesh.boundary) {
        if (b < 0 || b >= n) throw DataError("mesh: boundary references missing node");
        const Point& p = mesh.nodes[b];
        if (std::abs(std::hypot(p.x, p.y) - mesh.radius) > 1e-9 * mesh.radius)
            throw DataError("mesh: boundary node off the circle");
        double ang = std::atan2(p.y, p.x);
        if (ang < -1e-12) ang += 2.0 * std::numbers::pi;
        if (ang <= prev) throw DataError("mesh: boundary is not counterclockwise from angle 0");
        prev = ang;
    }
    if (std::abs(prev - 2.0 * std::numbers::pi) < 1e-12)
        throw DataError("mesh: boundary closes on itself");
}

namespace detail {

// Fan-triangulate the strip between two concentric rings whose node 0 sits at
// angle 0. Integer comparison of the angular fractions keeps the result
// exactly invariant under rotations that map both rings onto themselves.
inline void stitch_rings(std::span<const int> inner, std::span<const int> outer,
                         std::vector<Triangle>& out) {
    const long a = static_cast<long>(inner.size());
    const long b = static_cast<long>(outer.size());
    long i = 0, o = 0;
    while (i < a || o < b) {
        if (o < b && (i == a || (o + 1) * a <= (i + 1) * b)) {
            out.push_back({inner[i % a], outer[o % b], outer[(o + 1) % b]});
            ++o;
        } else {
            out.push_back({inner[i % a], outer[o % b], inner[(i + 1) % a]});
            ++i;
        }
    }
}

}  // namespace detail

/// Structured polar-ring triangulation of a disk.
///
/// `interior_density` scales the number of rings: at density 1 the radial
/// spacing matches the boundary edge length. Ring node counts are multiples of
/// gcd(boundary_segments, 16), so with boundary_segments a multiple of 16 the
/// mesh maps onto itself under rotation by 2*pi/16.
inline Mesh build_disk_mesh(double radius, int boundary_segments, double interior_density) {
    detail::require(radius > 0.0 && std::isfinite(radius), "build_disk_mesh: radius must be > 0");
    detail::require(interior_density > 0.0 && std::isfinite(interior_density),
                    "build_disk_mesh: interior_density must be > 0");
    detail::require(boundary_segments >= 16, "build_disk_mesh: boundary_segments must be >= 16");

    const long nb = boundary_segments;
    const long sym = std::gcd(nb, 16L);
    const long rings = std::max(
        1L, std::lround(interior_density * static_cast<double>(nb) / (2.0 * std::numbers::pi)));
    const long min_per_ring = ((6 + sym - 1) / sym) * sym;

    std::vector<long> counts(rings + 1, 0);
    for (long j = 1; j <= rings; ++j) {
        long c = sym * std::lround(static_cast<double>(nb * j) / static_cast<double>(rings * sym));
        c = std::max(c, min_per_ring);
        c = std::max(c, counts[j - 1]);
        counts[j] = (j == rings) ? nb : std::min(c, nb);
    }

    Mesh mesh;
    mesh.radius = radius;
    mesh.nodes.push_back({0.0, 0.0});
    std::vector<std::vector<int>> ring_ids(rings + 1);
    ring_ids[0] = {0};
    for (long j = 1; j <= rings; ++j) {
        const double r = (j == rings) ? radius
                                      : radius * static_cast<double>(j) / static_cast<double>(rings);
        for (long i = 0; i < counts[j]; ++i) {
            const double th = 2.0 * std::numbers::pi * static_cast<double>(i) /
                              static_cast<double>(counts[j]);
            ring_ids[j].push_back(static_cast<int>(mesh.nodes.size()));
            mesh.nodes.push_back({r * std::cos(th), r * std::sin(th)});
        }
    }

    const auto& first = ring_ids[1];
    for (std::size_t i = 0; i < first.size(); ++i)
        mesh.triangles.push_back({0, first[i], first[(i + 1) % first.size()]});
    for (long j = 2; j <= rings; ++j) detail::stitch_rings(ring_ids[j - 1], ring_ids[j], mesh.triangles);

    mesh.boundary = ring_ids[rings];
    return mesh;
}

/// Electrodes on the disk boundary, sorted counterclockwise.
struct ElectrodeLayout {
    std::vector<double> centers;            // radians in [0, 2*pi)
    double half_width = 0.0;                // arc half-width, radians
    std::vector<double> contact_impedance;  // one per electrode, normalized length

    std::size_t size() const { return centers.size(); }
};

inline constexpr double kDefaultContactImpedance = 0.01;

/// Half-width covering 50% of the slot pitch.
inline double default_half_width(int slot_count) {
    return std::numbers::pi / (2.0 * static_cast<double>(slot_count));
}

inline void validate(const ElectrodeLayout& layout) {
    const std::size_t c = layout.size();
    detail::require(c >= 4, "electrode layout: need at least 4 electrodes");
    detail::require(layout.contact_impedance.size() == c,
                    "electrode layout: one contact impedance per electrode");
    detail::require(layout.half_width > 0.0, "electrode layout: half-width must be positive");
    for (double z : layout.contact_impedance)
        detail::require(z > 0.0 && std::isfinite(z), "electrode layout: contact impedance must be > 0");
    for (std::size_t i = 0; i < c; ++i) {
        detail::require(layout.centers[i] >= 0.0 && layout.centers[i] < 2.0 * std::numbers::pi,
                        "electrode layout: centre angle outside [0, 2pi)");
        const double next = (i + 1 < c) ? layout.centers[i + 1]
                                        : layout.centers[0] + 2.0 * std::numbers::pi;
        detail::require(next - layout.centers[i] > 2.0 * layout.half_width,
                        "electrode layout: electrode arcs overlap");
    }
}

/// Electrodes at the selected positions of `slot_count` evenly spaced slots.
inline ElectrodeLayout layout_from_slots(int slot_count, std::span<const int> selected,
                                         double half_width,
                                         double contact_impedance = kDefaultContactImpedance) {
    detail::require(slot_count >= 4, "layout_from_slots: slot_count must be >= 4");
    std::vector<int> slots(selected.begin(), selected.end());
    std::sort(slots.begin(), slots.end());
    detail::require(std::adjacent_find(slots.begin(), slots.end()) == slots.end(),
                    "layout_from_slots: duplicate slot");
    detail::require(slots.size() >= 4, "layout_from_slots: fewer than 4 electrodes selected");
    detail::require(slots.front() >= 0 && slots.back() < slot_count,
                    "layout_from_slots: slot index out of range");
    ElectrodeLayout layout;
    for (int s : slots)
        layout.centers.push_back(2.0 * std::numbers::pi * static_cast<double>(s) /
                                 static_cast<double>(slot_count));
    layout.half_width = half_width;
    layout.contact_impedance.assign(slots.size(), contact_impedance);
    validate(layout);
    return layout;
}

/// Every `slot_count / count`-th slot starting at 0.
inline std::vector<int> even_slots(int slot_count, int count) {
    detail::require(count > 0 && slot_count % count == 0,
                    "even_slots: count must divide slot_count");
    std::vector<int> s;
    for (int i = 0; i < count; ++i) s.push_back(i * (slot_count / count));
    return s;
}

inline nlohmann::json to_json(const Mesh& mesh) {
    nlohmann::json j;
    j["radius"] = mesh.radius;
    auto& nodes = j["nodes"] = nlohmann::json::array();
    for (const auto& p : mesh.nodes) nodes.push_back({p.x, p.y});
    auto& tris = j["triangles"] = nlohmann::json::array();
    for (const auto& t : mesh.triangles) tris.push_back({t[0], t[1], t[2]});
    j["boundary"] = mesh.boundary;
    return j;
}

inline Mesh mesh_from_json(const nlohmann::json& j) {
    Mesh mesh;
    try {
        mesh.radius = j.at("radius").get<double>();
        for (const auto& p : j.at("nodes")) mesh.nodes.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        for (const auto& t : j.at("triangles"))
            mesh.triangles.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
        mesh.boundary = j.at("boundary").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("mesh: malformed JSON: ") + e.what());
    }
    validate(mesh);
    return mesh;
}

inline std::string mesh_id(const Mesh& mesh) { return short_hash(to_json(mesh).dump()); }

inline nlohmann::json to_json(const ElectrodeLayout& layout) {
    return {{"centers", layout.centers},
            {"half_width", layout.half_width},
            {"contact_impedance", layout.contact_impedance}};
}

inline std::string layout_id(const ElectrodeLayout& layout) {
    return short_hash(to_json(layout).dump());
}

}  // namespace eitpod
