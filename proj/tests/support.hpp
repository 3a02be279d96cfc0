#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "eitpod/eitpod.hpp"

namespace support {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = n(rng);
    return m;
}

// Random orthonormal columns from a QR factorization.
inline Eigen::MatrixXd orthonormal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(rows, rows, seed));
    return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double n = b.norm();
    return n > 0.0 ? (a - b).norm() / n : (a - b).norm();
}

inline const eitpod::Mesh& default_mesh() {
    static const eitpod::Mesh mesh = eitpod::build_disk_mesh(1.0, 64, 1.0);
    return mesh;
}

inline const eitpod::Mesh& coarse_mesh() {
    static const eitpod::Mesh mesh = eitpod::build_disk_mesh(1.0, 32, 0.5);
    return mesh;
}

// Even-8 electrodes on 16 slots.
inline eitpod::ElectrodeLayout reference_layout() {
    const auto slots = eitpod::even_slots(16, 8);
    return eitpod::layout_from_slots(16, slots, eitpod::default_half_width(16));
}

// Skip tuples for C electrodes built straight from the adjacency rule, with no
// ordering: every (i, i+1, j, j+1) whose four labels are distinct.
inline std::vector<std::array<int, 4>> brute_force_tuples(int c) {
    std::vector<std::array<int, 4>> out;
    for (int a = 0; a < c; ++a)
        for (int s = 0; s < c; ++s) {
            const std::set<int> labels{a, (a + 1) % c, s, (s + 1) % c};
            if (labels.size() == 4) out.push_back({a, (a + 1) % c, s, (s + 1) % c});
        }
    return out;
}

inline eitpod::PodBasis basis_from_modes(const Eigen::MatrixXd& modes, const eitpod::Protocol& p) {
    eitpod::PodBasis b;
    b.modes = modes;
    b.eigenvalues = Eigen::VectorXd::LinSpaced(modes.cols(), static_cast<double>(modes.cols()), 1.0);
    b.protocol_id = eitpod::protocol_id(p);
    return b;
}

// Normalized sums of Onsager partners: spans the reciprocal subspace, which
// electrode relabelling maps onto itself.
inline Eigen::MatrixXd onsager_pair_basis(const eitpod::Protocol& p) {
    std::vector<Eigen::VectorXd> cols;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const std::size_t j = *p.onsager_partner[i];
        if (j < i) continue;
        Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size()));
        v[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(j)] = std::sqrt(0.5);
        cols.push_back(v);
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(p.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = cols[c];
    return out;
}

}  // namespace support
