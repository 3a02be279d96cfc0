#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "eitpod/error.hpp"
#include "eitpod/hash.hpp"

namespace eitpod {

/// Measurement frames stored column-wise: D rows, n columns.
struct SnapshotMatrix {
    Eigen::MatrixXd frames;
    std::string protocol_id;
    std::vector<double> timestamps;  // empty or one per frame

    Eigen::Index measurement_count() const { return frames.rows(); }
    Eigen::Index frame_count() const { return frames.cols(); }
};

inline void validate(const SnapshotMatrix& u) {
    detail::require(u.frames.cols() >= 1 && u.frames.rows() >= 1, "snapshots: need at least one frame");
    detail::require(u.frames.allFinite(), "snapshots: non-finite entry");
    detail::require(u.timestamps.empty() || u.timestamps.size() == static_cast<std::size_t>(u.frames.cols()),
                    "snapshots: one timestamp per frame");
}

/// Orthonormal POD modes (columns) in descending eigenvalue order.
struct PodBasis {
    Eigen::MatrixXd modes;  // D x R
    Eigen::VectorXd eigenvalues;
    std::optional<Eigen::VectorXd> mean;
    bool centered = false;
    std::string protocol_id;

    Eigen::Index rank() const { return modes.cols(); }
    Eigen::Index dimension() const { return modes.rows(); }
};

namespace detail {

inline Eigen::VectorXd column_mean(const Eigen::MatrixXd& m) { return m.rowwise().mean(); }

// Largest-magnitude entry of each column made positive; first index wins ties.
inline void fix_signs(Eigen::MatrixXd& modes) {
    for (Eigen::Index c = 0; c < modes.cols(); ++c) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < modes.rows(); ++r) {
            if (std::abs(modes(r, c)) > best) {
                best = std::abs(modes(r, c));
                arg = r;
            }
        }
        if (modes(arg, c) < 0.0) modes.col(c) = -modes.col(c);
    }
}

}  // namespace detail

/// Snapshot covariance (1/(n-1)) U^T U, an n x n matrix.
inline Eigen::MatrixXd covariance(const SnapshotMatrix& u, bool center = false) {
    validate(u);
    const Eigen::Index n = u.frames.cols();
    detail::require(n >= 2, "covariance: need at least two frames");
    Eigen::MatrixXd x = u.frames;
    if (center) x.colwise() -= detail::column_mean(x);
    Eigen::MatrixXd c = (x.transpose() * x) / static_cast<double>(n - 1);
    return 0.5 * (c + c.transpose());
}

/// POD by thin SVD of the (optionally centred) snapshot matrix.
///
/// Eigenvalues are squared singular values over (n-1), matching the
/// eigenvalues of covariance(). `max_modes` truncates the basis.
inline PodBasis fit_pod(const SnapshotMatrix& u, bool center = false, Eigen::Index max_modes = -1) {
    validate(u);
    const Eigen::Index d = u.frames.rows();
    const Eigen::Index n = u.frames.cols();
    detail::require(max_modes == -1 || max_modes >= 1, "fit_pod: max_modes must be >= 1");
    detail::require(!center || n >= 2, "fit_pod: centring needs at least two frames");

    PodBasis basis;
    basis.centered = center;
    basis.protocol_id = u.protocol_id;
    Eigen::MatrixXd x = u.frames;
    if (center) {
        basis.mean = detail::column_mean(x);
        x.colwise() -= *basis.mean;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU);
    Eigen::Index r = std::min(d, center ? n - 1 : n);
    if (max_modes > 0) r = std::min(r, max_modes);
    const double denom = static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
    basis.modes = svd.matrixU().leftCols(r);
    basis.eigenvalues = svd.singularValues().head(r).array().square() / denom;
    for (Eigen::Index i = 0; i < r; ++i)
        if (basis.eigenvalues[i] < 0.0) basis.eigenvalues[i] = 0.0;
    detail::fix_signs(basis.modes);
    return basis;
}

/// POD coordinates of `d` in the first k modes.
inline Eigen::VectorXd project(const PodBasis& basis, const Eigen::VectorXd& d, Eigen::Index k) {
    detail::require(k >= 0 && k <= basis.rank(), "project: k exceeds basis rank");
    detail::require(d.size() == basis.dimension(), "project: frame length mismatch");
    if (basis.centered) return basis.modes.leftCols(k).transpose() * (d - *basis.mean);
    return basis.modes.leftCols(k).transpose() * d;
}

inline Eigen::VectorXd reconstruct(const PodBasis& basis, const Eigen::VectorXd& p) {
    detail::require(p.size() <= basis.rank(), "reconstruct: more coordinates than modes");
    Eigen::VectorXd d = basis.modes.leftCols(p.size()) * p;
    if (basis.centered) d += *basis.mean;
    return d;
}

/// Fraction of total eigenvalue mass captured by the first k modes.
inline double captured_fraction(const PodBasis& basis, Eigen::Index k) {
    const double total = basis.eigenvalues.sum();
    if (total <= 0.0) return 1.0;
    return basis.eigenvalues.head(std::min(k, basis.rank())).sum() / total;
}

inline nlohmann::json to_json(const PodBasis& basis) {
    nlohmann::json j;
    j["protocol_id"] = basis.protocol_id;
    j["centered"] = basis.centered;
    if (basis.mean) j["mean"] = std::vector<double>(basis.mean->data(), basis.mean->data() + basis.mean->size());
    j["eigenvalues"] = std::vector<double>(basis.eigenvalues.data(),
                                           basis.eigenvalues.data() + basis.eigenvalues.size());
    auto& modes = j["modes"] = nlohmann::json::array();
    for (Eigen::Index c = 0; c < basis.modes.cols(); ++c) {
        const Eigen::VectorXd col = basis.modes.col(c);
        modes.push_back(std::vector<double>(col.data(), col.data() + col.size()));
    }
    return j;
}

inline PodBasis pod_from_json(const nlohmann::json& j) {
    PodBasis b;
    try {
        b.protocol_id = j.at("protocol_id").get<std::string>();
        b.centered = j.at("centered").get<bool>();
        const auto ev = j.at("eigenvalues").get<std::vector<double>>();
        b.eigenvalues = Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
        const auto cols = j.at("modes").get<std::vector<std::vector<double>>>();
        if (cols.size() != ev.size()) throw DataError("basis: mode/eigenvalue count mismatch");
        const auto dim = cols.empty() ? 0 : static_cast<Eigen::Index>(cols.front().size());
        b.modes.resize(dim, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (static_cast<Eigen::Index>(cols[c].size()) != dim) throw DataError("basis: ragged modes");
            b.modes.col(static_cast<Eigen::Index>(c)) =
                Eigen::Map<const Eigen::VectorXd>(cols[c].data(), dim);
        }
        if (j.contains("mean")) {
            const auto mv = j.at("mean").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(mv.size()) != dim) throw DataError("basis: mean length mismatch");
            b.mean = Eigen::Map<const Eigen::VectorXd>(mv.data(), dim);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("basis: malformed JSON: ") + e.what());
    }
    if (b.centered && !b.mean) throw DataError("basis: centred basis without mean");
    return b;
}

inline std::string basis_id(const PodBasis& basis) { return short_hash(to_json(basis).dump()); }

}  // namespace eitpod
