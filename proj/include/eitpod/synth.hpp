#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "eitpod/error.hpp"
#include "eitpod/fem.hpp"
#include "eitpod/mesh.hpp"
#include "eitpod/pod.hpp"
#include "eitpod/protocol.hpp"

namespace eitpod {

struct Anomaly {
    Point center;
    double radius = 0.0;
    double conductivity = 1.0;
};

struct Phantom {
    double background = 1.0;
    std::vector<Anomaly> anomalies;
};

/// Per-element conductivity: background, overridden where the element
/// centroid lies inside an anomaly (later anomalies win).
inline Conductivity make_phantom(const Phantom& phantom, const Mesh& mesh) {
    detail::require(phantom.background > 0.0, "make_phantom: background conductivity must be > 0");
    for (const auto& a : phantom.anomalies) {
        detail::require(a.conductivity > 0.0, "make_phantom: anomaly conductivity must be > 0");
        detail::require(a.radius > 0.0, "make_phantom: anomaly radius must be > 0");
        detail::require(std::hypot(a.center.x, a.center.y) + a.radius <= mesh.radius * (1.0 + 1e-12),
                        "make_phantom: anomaly must lie within the disk");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(mesh.element_count()));
    for (std::size_t k = 0; k < mesh.element_count(); ++k) {
        const Point c = mesh.centroid(k);
        double s = phantom.background;
        for (const auto& a : phantom.anomalies)
            if (std::hypot(c.x - a.center.x, c.y - a.center.y) < a.radius) s = a.conductivity;
        v[static_cast<Eigen::Index>(k)] = s;
    }
    return Conductivity(std::move(v));
}

enum class PathKind { Static, Orbit, Sweep, Poses };

/// Parametric path of one circular inclusion over the normalized time t in [0, 1].
struct AnomalyPath {
    PathKind kind = PathKind::Static;
    double radius = 0.2;
    double conductivity = 2.0;
    Point start;                 // Static, Sweep: start; Orbit: unused
    Point end;                   // Sweep
    double orbit_radius = 0.5;   // Orbit
    double phase = 0.0;          // Orbit, radians
    double turns = 1.0;          // Orbit
    std::vector<Point> poses;    // Poses: held for equal shares of the session

    Anomaly at(double t) const {
        Anomaly a{start, radius, conductivity};
        switch (kind) {
            case PathKind::Static:
                break;
            case PathKind::Orbit: {
                const double th = phase + 2.0 * std::numbers::pi * turns * t;
                a.center = {orbit_radius * std::cos(th), orbit_radius * std::sin(th)};
                break;
            }
            case PathKind::Sweep:
                a.center = {start.x + t * (end.x - start.x), start.y + t * (end.y - start.y)};
                break;
            case PathKind::Poses: {
                detail::require(!poses.empty(), "anomaly path: poses list is empty");
                const auto n = poses.size();
                const auto i = std::min(n - 1, static_cast<std::size_t>(t * static_cast<double>(n)));
                a.center = poses[i];
                break;
            }
        }
        return a;
    }
};

struct SessionSpec {
    int frame_count = 200;
    double background = 1.0;
    std::vector<AnomalyPath> anomalies;
    double contact_noise = 0.2;  // log-normal sigma of per-frame contact impedance jitter
    double sensor_noise = 1e-4;  // additive Gaussian std on measurements
    std::uint64_t seed = 1;
};

inline void validate(const SessionSpec& s) {
    detail::require(s.frame_count >= 1, "session: frame_count must be >= 1");
    detail::require(s.contact_noise >= 0.0 && s.sensor_noise >= 0.0, "session: noise levels must be >= 0");
    detail::require(s.background > 0.0, "session: background must be > 0");
}

struct Session {
    SnapshotMatrix frames;  // noisy measurements
    Eigen::MatrixXd truth;  // same frames without sensor noise
};

namespace detail {

// Independent stream per frame so the session does not depend on evaluation order.
inline std::mt19937_64 frame_rng(std::uint64_t seed, int frame) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(frame), 0x5eed5eedU};
    return std::mt19937_64(seq);
}

}  // namespace detail

inline Session simulate_session(const Mesh& mesh, const ElectrodeLayout& layout, const Protocol& protocol,
                                const SessionSpec& spec) {
    validate(spec);
    const auto d = static_cast<Eigen::Index>(protocol.size());
    Session out;
    out.frames.protocol_id = protocol_id(protocol);
    out.frames.frames.resize(d, spec.frame_count);
    out.truth.resize(d, spec.frame_count);
    out.frames.timestamps.resize(static_cast<std::size_t>(spec.frame_count));

    for (int f = 0; f < spec.frame_count; ++f) {
        auto rng = detail::frame_rng(spec.seed, f);
        std::normal_distribution<double> normal(0.0, 1.0);
        const double t = spec.frame_count > 1 ? static_cast<double>(f) / (spec.frame_count - 1) : 0.0;

        Phantom ph{spec.background, {}};
        for (const auto& path : spec.anomalies) ph.anomalies.push_back(path.at(t));

        ElectrodeLayout lay = layout;
        for (double& z : lay.contact_impedance) z *= std::exp(spec.contact_noise * normal(rng));

        const Eigen::VectorXd clean = ForwardModel(mesh, make_phantom(ph, mesh), lay).measure(protocol);
        out.truth.col(f) = clean;
        Eigen::VectorXd noisy = clean;
        if (spec.sensor_noise > 0.0)
            for (Eigen::Index i = 0; i < d; ++i) noisy[i] += spec.sensor_noise * normal(rng);
        out.frames.frames.col(f) = noisy;
        out.frames.timestamps[static_cast<std::size_t>(f)] = static_cast<double>(f);
    }
    return out;
}

enum class FaultModel { Drop, Zero, Saturate };

struct FaultedFrames {
    Eigen::MatrixXd frames;                  // D' x n for Drop, D x n otherwise
    std::vector<std::size_t> valid_indices;
};

/// Removes or corrupts every measurement that touches a bad electrode.
/// Saturated entries are pinned to `rail` (default: 10x the largest magnitude in U).
inline FaultedFrames inject_fault(const SnapshotMatrix& u, const Protocol& protocol,
                                  const std::set<int>& bad, FaultModel model, double rail = 0.0) {
    detail::require(u.frames.rows() == static_cast<Eigen::Index>(protocol.size()),
                    "inject_fault: frame length must equal protocol size");
    FaultedFrames out;
    out.valid_indices = valid_subset(protocol, bad);
    const auto n = u.frames.cols();
    if (model == FaultModel::Drop) {
        out.frames.resize(static_cast<Eigen::Index>(out.valid_indices.size()), n);
        for (std::size_t i = 0; i < out.valid_indices.size(); ++i)
            out.frames.row(static_cast<Eigen::Index>(i)) =
                u.frames.row(static_cast<Eigen::Index>(out.valid_indices[i]));
        return out;
    }
    const double value = model == FaultModel::Zero ? 0.0
                         : rail != 0.0             ? rail
                                                   : 10.0 * u.frames.cwiseAbs().maxCoeff();
    out.frames = u.frames;
    std::vector<char> keep(protocol.size(), 0);
    for (auto i : out.valid_indices) keep[i] = 1;
    for (std::size_t i = 0; i < protocol.size(); ++i)
        if (!keep[i]) out.frames.row(static_cast<Eigen::Index>(i)).setConstant(value);
    return out;
}

/// Electrodes whose every measurement is flat over the session or out of range.
inline std::set<int> detect_bad_electrodes(const Eigen::MatrixXd& frames, const Protocol& protocol,
                                           double flat_tolerance = 0.0, double range = 1e6) {
    detail::require(frames.rows() == static_cast<Eigen::Index>(protocol.size()),
                    "detect_bad_electrodes: frame length must equal protocol size");
    std::vector<char> suspect(protocol.size(), 0);
    for (std::size_t i = 0; i < protocol.size(); ++i) {
        const auto row = frames.row(static_cast<Eigen::Index>(i));
        const bool flat = frames.cols() > 1 && row.maxCoeff() - row.minCoeff() <= flat_tolerance;
        const bool wild = !row.allFinite() || row.cwiseAbs().maxCoeff() > range;
        suspect[i] = flat || wild;
    }
    std::set<int> bad;
    for (int e = 0; e < protocol.electrode_count; ++e) {
        bool all = true, any = false;
        for (std::size_t i = 0; i < protocol.size(); ++i) {
            if (!protocol.measurements[i].involves(e)) continue;
            any = true;
            all = all && suspect[i];
        }
        if (any && all) bad.insert(e);
    }
    return bad;
}

namespace detail {

inline PathKind path_kind_from_string(const std::string& s) {
    if (s == "static") return PathKind::Static;
    if (s == "orbit") return PathKind::Orbit;
    if (s == "sweep") return PathKind::Sweep;
    if (s == "poses") return PathKind::Poses;
    throw DataError("session: unknown path kind '" + s + "'");
}

inline Point point_from_json(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace detail

/// Session spec file:
/// {frame_count, background, contact_noise, sensor_noise, seed,
///  anomalies: [{kind: static|orbit|sweep|poses, radius, conductivity,
///               start, end, orbit_radius, phase, turns, poses}]}
/// Every field is optional and falls back to the SessionSpec defaults.
inline SessionSpec session_from_json(const nlohmann::json& j) {
    SessionSpec s;
    try {
        s.frame_count = j.value("frame_count", s.frame_count);
        s.background = j.value("background", s.background);
        s.contact_noise = j.value("contact_noise", s.contact_noise);
        s.sensor_noise = j.value("sensor_noise", s.sensor_noise);
        s.seed = j.value("seed", s.seed);
        if (j.contains("anomalies")) {
            for (const auto& a : j.at("anomalies")) {
                AnomalyPath p;
                p.kind = detail::path_kind_from_string(a.value("kind", std::string("static")));
                p.radius = a.value("radius", p.radius);
                p.conductivity = a.value("conductivity", p.conductivity);
                if (a.contains("start")) p.start = detail::point_from_json(a.at("start"));
                if (a.contains("end")) p.end = detail::point_from_json(a.at("end"));
                p.orbit_radius = a.value("orbit_radius", p.orbit_radius);
                p.phase = a.value("phase", p.phase);
                p.turns = a.value("turns", p.turns);
                if (a.contains("poses"))
                    for (const auto& q : a.at("poses")) p.poses.push_back(detail::point_from_json(q));
                s.anomalies.push_back(p);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("session: malformed JSON: ") + e.what());
    }
    validate(s);
    return s;
}

/// Smooth default session: one inclusion orbiting once plus a slow radial sweep.
inline SessionSpec default_session(int frame_count = 200, std::uint64_t seed = 1) {
    SessionSpec s;
    s.frame_count = frame_count;
    s.seed = seed;
    AnomalyPath orbit;
    orbit.kind = PathKind::Orbit;
    orbit.radius = 0.25;
    orbit.conductivity = 2.0;
    orbit.orbit_radius = 0.5;
    AnomalyPath sweep;
    sweep.kind = PathKind::Sweep;
    sweep.radius = 0.15;
    sweep.conductivity = 0.5;
    sweep.start = {-0.6, 0.0};
    sweep.end = {0.0, -0.6};
    s.anomalies = {orbit, sweep};
    return s;
}

}  // namespace eitpod
