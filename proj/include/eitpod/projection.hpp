#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eitpod/error.hpp"
#include "eitpod/pod.hpp"
#include "eitpod/protocol.hpp"

namespace eitpod {

struct ProjectorOptions {
    double condition_threshold = 1e8;
    // Truncated-spectrum pseudo-inverse instead of failing on ill-conditioned Phi'.
    bool regularized = false;
    double cutoff = 1e-10;  // relative singular-value cutoff for the regularized path
    // Fewer than D' modes: least-squares fit of the reduced frame.
    std::optional<Eigen::Index> modes;
    // One mode per distinct Onsager class among the valid measurements;
    // reciprocal partners carry the same value, so only these are independent.
    bool onsager_modes = false;
};

/// Number of valid measurements left after merging Onsager partners.
inline Eigen::Index independent_count(const Protocol& protocol, const std::vector<std::size_t>& valid) {
    Eigen::Index n = 0;
    for (auto i : valid) {
        const auto& partner = protocol.onsager_partner[i];
        if (!partner || *partner > i) ++n;
    }
    return n;
}

/// Maps a frame restricted to valid measurements (length D') back to a full
/// frame (length D) through the first D' POD modes.
struct ProjectionOperator {
    std::set<int> bad_electrodes;
    std::vector<std::size_t> valid_indices;
    Eigen::MatrixXd map;  // D x D'
    double condition = 1.0;
    Eigen::Index modes_used = 0;
    std::optional<Eigen::VectorXd> mean;
    std::string basis_id;
    std::string protocol_id;

    Eigen::Index full_size() const { return map.rows(); }
    Eigen::Index reduced_size() const { return map.cols(); }
};

/// Entries of a full frame at `indices`.
inline Eigen::VectorXd restrict_frame(const Eigen::VectorXd& d, const std::vector<std::size_t>& indices) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        detail::require(static_cast<Eigen::Index>(indices[i]) < d.size(), "restrict_frame: index out of range");
        out[static_cast<Eigen::Index>(i)] = d[static_cast<Eigen::Index>(indices[i])];
    }
    return out;
}

inline double condition_number(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return 1.0;
    const double smin = s[s.size() - 1];
    return smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity();
}

inline ProjectionOperator build_projector(const PodBasis& basis, const Protocol& protocol,
                                          const std::set<int>& bad_electrodes,
                                          const ProjectorOptions& opts = {}) {
    const std::string pid = protocol_id(protocol);
    if (!basis.protocol_id.empty() && basis.protocol_id != pid)
        throw DataError("build_projector: basis protocol " + basis.protocol_id + " does not match " + pid);
    detail::require(basis.dimension() == static_cast<Eigen::Index>(protocol.size()),
                    "build_projector: basis dimension must equal protocol size");

    ProjectionOperator op;
    op.bad_electrodes = bad_electrodes;
    op.valid_indices = valid_subset(protocol, bad_electrodes);
    op.basis_id = basis_id(basis);
    op.protocol_id = pid;
    if (basis.centered) op.mean = *basis.mean;

    const auto reduced = static_cast<Eigen::Index>(op.valid_indices.size());
    detail::require(!(opts.modes && opts.onsager_modes), "build_projector: choose either modes or onsager_modes");
    const Eigen::Index k = opts.modes           ? *opts.modes
                           : opts.onsager_modes ? independent_count(protocol, op.valid_indices)
                                                : reduced;
    detail::require(k >= 1 && k <= reduced, "build_projector: mode count must be in [1, D']");
    if (basis.rank() < k)
        throw InvalidArgument("build_projector: basis has " + std::to_string(basis.rank()) +
                              " modes, need " + std::to_string(k));
    op.modes_used = k;

    Eigen::MatrixXd phi_reduced(reduced, k);  // valid rows, first k modes
    for (Eigen::Index i = 0; i < reduced; ++i)
        phi_reduced.row(i) = basis.modes.row(static_cast<Eigen::Index>(op.valid_indices[i])).head(k);
    const Eigen::MatrixXd phi_full = basis.modes.leftCols(k);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi_reduced, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    op.condition = s[k - 1] > 0.0 ? s[0] / s[k - 1] : std::numeric_limits<double>::infinity();

    if (op.condition > opts.condition_threshold && !opts.regularized) {
        std::ostringstream msg;
        msg << "build_projector: reduced mode matrix is ill-conditioned (condition " << op.condition
            << " > " << opts.condition_threshold << ", D' = " << reduced << ")";
        throw NumericalError(msg.str());
    }

    if (k == reduced && !opts.regularized) {
        // map = Phi'' Phi'^{-1}, via an LU solve of Phi'^T X = Phi''^T.
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(phi_reduced.transpose());
        op.map = lu.solve(phi_full.transpose()).transpose();
    } else {
        const double floor = opts.regularized ? opts.cutoff * s[0] : 0.0;
        Eigen::VectorXd inv_s(s.size());
        for (Eigen::Index i = 0; i < s.size(); ++i) inv_s[i] = s[i] > floor && s[i] > 0.0 ? 1.0 / s[i] : 0.0;
        const Eigen::MatrixXd pinv = svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose();
        op.map = phi_full * pinv;
    }
    if (!op.map.allFinite()) throw NumericalError("build_projector: non-finite projection map");
    return op;
}

/// d'' = Phi'' Phi'^{-1} d' (mean-subtracted and restored for centred bases).
inline Eigen::VectorXd apply_projector(const ProjectionOperator& op, const Eigen::VectorXd& reduced) {
    detail::require(reduced.size() == op.reduced_size(), "apply_projector: reduced frame length mismatch");
    if (!op.mean) return op.map * reduced;
    const Eigen::VectorXd mean_valid = restrict_frame(*op.mean, op.valid_indices);
    return *op.mean + op.map * (reduced - mean_valid);
}

struct ConditioningRow {
    int electrode = 0;
    std::size_t reduced_size = 0;
    double condition = 0.0;
    double residual = std::numeric_limits<double>::quiet_NaN();  // worst in-span round-trip error
    bool flagged = false;                                          // condition above threshold
};

/// Single-electrode dropout table, ordered by electrode index.
///
/// `held_out` frames (columns) are projected onto the first D' modes and
/// pushed through restrict -> apply; the residual is the largest relative
/// round-trip error. Without held-out frames the D' modes themselves are used.
inline std::vector<ConditioningRow> conditioning_report(const PodBasis& basis, const Protocol& protocol,
                                                        const Eigen::MatrixXd& held_out = {},
                                                        double threshold = 1e8) {
    std::vector<ConditioningRow> rows;
    for (int e = 0; e < protocol.electrode_count; ++e) {
        ConditioningRow row;
        row.electrode = e;
        ProjectorOptions opts;
        opts.regularized = true;
        opts.condition_threshold = threshold;
        opts.cutoff = 0.0;
        const auto valid = valid_subset(protocol, {e});
        row.reduced_size = valid.size();
        const auto k = static_cast<Eigen::Index>(valid.size());
        if (basis.rank() < k) {
            row.condition = std::numeric_limits<double>::infinity();
            row.flagged = true;
            rows.push_back(row);
            continue;
        }
        const ProjectionOperator op = build_projector(basis, protocol, {e}, opts);
        row.condition = op.condition;
        row.flagged = !(op.condition <= threshold);
        if (!row.flagged) {
            const Eigen::MatrixXd modes = basis.modes.leftCols(k);
            Eigen::MatrixXd frames = modes;
            if (held_out.size()) {
                Eigen::MatrixXd x = held_out;
                if (basis.centered) x.colwise() -= *basis.mean;
                frames = modes * (modes.transpose() * x);
            }
            double worst = 0.0;
            for (Eigen::Index c = 0; c < frames.cols(); ++c) {
                Eigen::VectorXd d = frames.col(c);
                if (basis.centered) d += *basis.mean;
                const Eigen::VectorXd back = apply_projector(op, restrict_frame(d, op.valid_indices));
                const double nrm = d.norm();
                worst = std::max(worst, nrm > 0.0 ? (back - d).norm() / nrm : (back - d).norm());
            }
            row.residual = worst;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace eitpod
