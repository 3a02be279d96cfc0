#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "eitpod/error.hpp"
#include "eitpod/mesh.hpp"
#include "eitpod/protocol.hpp"

namespace eitpod {

/// One strictly positive conductivity per mesh element.
class Conductivity {
public:
    Conductivity() = default;
    explicit Conductivity(Eigen::VectorXd values) : values_(std::move(values)) {
        for (Eigen::Index k = 0; k < values_.size(); ++k)
            detail::require(values_[k] > 0.0 && std::isfinite(values_[k]),
                            "conductivity: every entry must be finite and > 0");
    }
    static Conductivity uniform(const Mesh& mesh, double value = 1.0) {
        return Conductivity(
            Eigen::VectorXd::Constant(static_cast<Eigen::Index>(mesh.element_count()), value));
    }

    const Eigen::VectorXd& values() const { return values_; }
    Eigen::Index size() const { return values_.size(); }
    double operator[](Eigen::Index k) const { return values_[k]; }

private:
    Eigen::VectorXd values_;
};

/// D x M sensitivity of measurements to element conductivities.
struct Jacobian {
    Eigen::MatrixXd matrix;
    Conductivity background;
    std::string protocol_id;
    std::string layout_id;
};

/// Potentials produced by one current pattern.
struct Field {
    Eigen::VectorXd nodal;       // one per mesh node
    Eigen::VectorXd electrodes;  // one per electrode, zero mean
};

namespace detail {

// Portion of one boundary edge lying under an electrode. The edge runs from
// node a (t = 0) to node b (t = 1); [t0, t1] is the covered parameter range.
struct ContactSegment {
    int electrode = 0;
    int element = 0;
    int node_a = 0;
    int node_b = 0;
    double m_aa = 0, m_ab = 0, m_bb = 0;  // integral of phi_i * phi_j
    double b_a = 0, b_b = 0;              // integral of phi_i
    double length = 0;                    // covered length
};

inline std::vector<ContactSegment> contact_segments(const Mesh& mesh, const ElectrodeLayout& layout) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::map<std::pair<int, int>, int> edge_owner;
    for (std::size_t k = 0; k < mesh.triangles.size(); ++k) {
        const auto& t = mesh.triangles[k];
        for (int e = 0; e < 3; ++e) {
            const int a = t[e], b = t[(e + 1) % 3];
            edge_owner[{std::min(a, b), std::max(a, b)}] = static_cast<int>(k);
        }
    }

    const auto nb = mesh.boundary.size();
    std::vector<double> angle(nb + 1);
    for (std::size_t i = 0; i < nb; ++i) {
        const Point& p = mesh.nodes[mesh.boundary[i]];
        double th = std::atan2(p.y, p.x);
        if (th < 0.0) th += two_pi;
        if (i == 0 && th > std::numbers::pi) th -= two_pi;
        angle[i] = th;
    }
    angle[nb] = angle[0] + two_pi;

    std::vector<ContactSegment> out;
    for (std::size_t i = 0; i < nb; ++i) {
        const int a = mesh.boundary[i];
        const int b = mesh.boundary[(i + 1) % nb];
        const double th0 = angle[i], th1 = angle[i + 1];
        const Point& pa = mesh.nodes[a];
        const Point& pb = mesh.nodes[b];
        const double edge_len = std::hypot(pb.x - pa.x, pb.y - pa.y);
        auto it = edge_owner.find({std::min(a, b), std::max(a, b)});
        if (it == edge_owner.end()) throw DataError("mesh: boundary edge has no owning triangle");

        for (std::size_t l = 0; l < layout.size(); ++l) {
            double t0 = 1.0, t1 = 0.0;
            for (double shift : {-two_pi, 0.0, two_pi}) {
                const double lo = std::max(th0, layout.centers[l] - layout.half_width + shift);
                const double hi = std::min(th1, layout.centers[l] + layout.half_width + shift);
                if (hi > lo) {
                    t0 = (lo - th0) / (th1 - th0);
                    t1 = (hi - th0) / (th1 - th0);
                    break;
                }
            }
            constexpr double snap = 1e-9;
            if (t0 < snap) t0 = 0.0;
            if (t1 > 1.0 - snap) t1 = 1.0;
            if (!(t1 - t0 > snap)) continue;

            // Closed-form integrals of linear hat functions over [t0, t1].
            const double d1 = t1 - t0;
            const double d2 = (t1 * t1 - t0 * t0) / 2.0;
            const double d3 = (t1 * t1 * t1 - t0 * t0 * t0) / 3.0;
            ContactSegment s;
            s.electrode = static_cast<int>(l);
            s.element = it->second;
            s.node_a = a;
            s.node_b = b;
            s.m_aa = edge_len * (d1 - 2.0 * d2 + d3);
            s.m_ab = edge_len * (d2 - d3);
            s.m_bb = edge_len * d3;
            s.b_a = edge_len * (d1 - d2);
            s.b_b = edge_len * d2;
            s.length = edge_len * d1;
            out.push_back(s);
        }
    }
    return out;
}

}  // namespace detail

/// Complete-electrode-model forward solver for one (mesh, conductivity, layout).
///
/// The contact impedance of each electrode is a normalized length z: the
/// admittance of a contact segment is sigma(owning element) / z. The system
/// matrix is therefore linear in sigma and measurements scale as 1/sigma.
///
/// Electrode potentials are constrained to zero mean through the basis
/// U = N beta with N = [e_0 - e_1, ..., e_0 - e_{C-1}], which keeps the
/// reduced system symmetric positive definite. The factorization is computed
/// once in the constructor and reused by every solve.
class ForwardModel {
public:
    ForwardModel(const Mesh& mesh, Conductivity sigma, const ElectrodeLayout& layout)
        : mesh_(&mesh), sigma_(std::move(sigma)), layout_(layout) {
        detail::require(static_cast<std::size_t>(sigma_.size()) == mesh.element_count(),
                        "forward model: conductivity length must equal element count");
        validate(layout_);
        precompute_geometry();
        segments_ = detail::contact_segments(mesh, layout_);
        for (std::size_t l = 0; l < layout_.size(); ++l) {
            bool touched = false;
            for (const auto& s : segments_) touched = touched || s.electrode == static_cast<int>(l);
            if (!touched) throw InvalidArgument("forward model: electrode " + std::to_string(l) +
                                                " covers no boundary edge");
        }
        assemble_and_factor();
    }

    const Mesh& mesh() const { return *mesh_; }
    const ElectrodeLayout& layout() const { return layout_; }
    const Conductivity& conductivity() const { return sigma_; }
    std::size_t electrode_count() const { return layout_.size(); }

    /// Potentials for a zero-sum vector of injected electrode currents.
    Field solve(const Eigen::VectorXd& currents) const {
        const auto c = static_cast<Eigen::Index>(layout_.size());
        detail::require(currents.size() == c, "solve: one current per electrode");
        detail::require(std::abs(currents.sum()) <= 1e-12 * (1.0 + currents.cwiseAbs().sum()),
                        "solve: injected currents must sum to zero");
        const auto n = static_cast<Eigen::Index>(mesh_->node_count());
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + c - 1);
        for (Eigen::Index k = 1; k < c; ++k) rhs[n + k - 1] = currents[0] - currents[k];
        const Eigen::VectorXd x = llt_.solve(rhs);
        if (llt_.info() != Eigen::Success || !x.allFinite())
            throw NumericalError("forward model: solve failed");
        Field f;
        f.nodal = x.head(n);
        const Eigen::VectorXd beta = x.tail(c - 1);
        f.electrodes.resize(c);
        f.electrodes[0] = beta.sum();
        f.electrodes.tail(c - 1) = -beta;
        return f;
    }

    /// Field for `amplitude` entering at `pos` and leaving at `neg`.
    Field solve_pair(int pos, int neg, double amplitude = 1.0) const {
        const auto c = static_cast<int>(layout_.size());
        detail::require(pos >= 0 && pos < c && neg >= 0 && neg < c && pos != neg,
                        "solve_pair: invalid electrode pair");
        Eigen::VectorXd cur = Eigen::VectorXd::Zero(c);
        cur[pos] = amplitude;
        cur[neg] = -amplitude;
        return solve(cur);
    }

    /// Current flowing from each electrode into the body for a solved field.
    Eigen::VectorXd electrode_currents(const Field& f) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout_.size()));
        for (const auto& s : segments_) {
            const double y = sigma_[s.element] / layout_.contact_impedance[s.electrode];
            out[s.electrode] += y * (s.length * f.electrodes[s.electrode] - s.b_a * f.nodal[s.node_a] -
                                     s.b_b * f.nodal[s.node_b]);
        }
        return out;
    }

    Eigen::VectorXd measure(const Protocol& protocol, double amplitude = 1.0) const {
        check_protocol(protocol);
        FieldCache cache(*this, amplitude);
        Eigen::VectorXd d(static_cast<Eigen::Index>(protocol.size()));
        for (std::size_t i = 0; i < protocol.size(); ++i) {
            const auto& m = protocol.measurements[i];
            const Field& f = cache.get(m.drive_pos, m.drive_neg);
            d[static_cast<Eigen::Index>(i)] = f.electrodes[m.sense_pos] - f.electrodes[m.sense_neg];
        }
        return d;
    }

    /// Adjoint Jacobian: J_ik = -(drive field, unit sense field) energy on element k.
    Jacobian jacobian(const Protocol& protocol) const {
        check_protocol(protocol);
        FieldCache cache(*this, 1.0);
        const auto m_count = static_cast<Eigen::Index>(mesh_->element_count());
        Jacobian jac;
        jac.matrix.resize(static_cast<Eigen::Index>(protocol.size()), m_count);
        jac.background = sigma_;
        jac.protocol_id = protocol_id(protocol);
        jac.layout_id = layout_id(layout_);

        std::map<std::pair<int, int>, Eigen::MatrixX2d> grads;
        auto gradient_of = [&](int pos, int neg) -> const Eigen::MatrixX2d& {
            auto it = grads.find({pos, neg});
            if (it != grads.end()) return it->second;
            return grads.emplace(std::make_pair(pos, neg), element_gradients(cache.get(pos, neg)))
                .first->second;
        };

        for (std::size_t i = 0; i < protocol.size(); ++i) {
            const auto& m = protocol.measurements[i];
            const auto& gd = gradient_of(m.drive_pos, m.drive_neg);
            const auto& gs = gradient_of(m.sense_pos, m.sense_neg);
            auto row = jac.matrix.row(static_cast<Eigen::Index>(i));
            row = -(area_.array() * (gd.col(0).array() * gs.col(0).array() +
                                     gd.col(1).array() * gs.col(1).array()))
                       .matrix()
                       .transpose();
            const Field& fd = cache.get(m.drive_pos, m.drive_neg);
            const Field& fs = cache.get(m.sense_pos, m.sense_neg);
            for (const auto& s : segments_) {
                const double ud_a = fd.nodal[s.node_a], ud_b = fd.nodal[s.node_b];
                const double us_a = fs.nodal[s.node_a], us_b = fs.nodal[s.node_b];
                const double vd = fd.electrodes[s.electrode], vs = fs.electrodes[s.electrode];
                const double energy = s.m_aa * ud_a * us_a + s.m_ab * (ud_a * us_b + ud_b * us_a) +
                                      s.m_bb * ud_b * us_b - vs * (s.b_a * ud_a + s.b_b * ud_b) -
                                      vd * (s.b_a * us_a + s.b_b * us_b) + vd * vs * s.length;
                row[s.element] -= energy / layout_.contact_impedance[s.electrode];
            }
        }
        return jac;
    }

private:
    class FieldCache {
    public:
        FieldCache(const ForwardModel& model, double amplitude) : model_(model), amplitude_(amplitude) {}
        const Field& get(int pos, int neg) {
            auto it = fields_.find({pos, neg});
            if (it != fields_.end()) return it->second;
            return fields_.emplace(std::make_pair(pos, neg), model_.solve_pair(pos, neg, amplitude_))
                .first->second;
        }

    private:
        const ForwardModel& model_;
        double amplitude_;
        std::map<std::pair<int, int>, Field> fields_;
    };

    void check_protocol(const Protocol& protocol) const {
        if (static_cast<std::size_t>(protocol.electrode_count) != layout_.size())
            throw InvalidArgument("protocol/layout mismatch: protocol expects " +
                                  std::to_string(protocol.electrode_count) + " electrodes, layout has " +
                                  std::to_string(layout_.size()));
    }

    void precompute_geometry() {
        const auto m = mesh_->element_count();
        area_.resize(static_cast<Eigen::Index>(m));
        shape_grad_.resize(m);
        for (std::size_t k = 0; k < m; ++k) {
            const auto& t = mesh_->triangles[k];
            const Point& p0 = mesh_->nodes[t[0]];
            const Point& p1 = mesh_->nodes[t[1]];
            const Point& p2 = mesh_->nodes[t[2]];
            const double two_a = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
            if (!(two_a > 0.0)) throw DataError("forward model: degenerate or clockwise triangle");
            area_[static_cast<Eigen::Index>(k)] = 0.5 * two_a;
            shape_grad_[k] = {{{(p1.y - p2.y) / two_a, (p2.x - p1.x) / two_a},
                               {(p2.y - p0.y) / two_a, (p0.x - p2.x) / two_a},
                               {(p0.y - p1.y) / two_a, (p1.x - p0.x) / two_a}}};
        }
    }

    Eigen::MatrixX2d element_gradients(const Field& f) const {
        const auto m = mesh_->element_count();
        Eigen::MatrixX2d g(static_cast<Eigen::Index>(m), 2);
        for (std::size_t k = 0; k < m; ++k) {
            const auto& t = mesh_->triangles[k];
            double gx = 0.0, gy = 0.0;
            for (int v = 0; v < 3; ++v) {
                gx += f.nodal[t[v]] * shape_grad_[k][v][0];
                gy += f.nodal[t[v]] * shape_grad_[k][v][1];
            }
            g(static_cast<Eigen::Index>(k), 0) = gx;
            g(static_cast<Eigen::Index>(k), 1) = gy;
        }
        return g;
    }

    void assemble_and_factor() {
        const auto n = static_cast<Eigen::Index>(mesh_->node_count());
        const auto c = static_cast<Eigen::Index>(layout_.size());
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(mesh_->element_count() * 9 + segments_.size() * 8 + (c - 1) * (c - 1));

        for (std::size_t k = 0; k < mesh_->element_count(); ++k) {
            const auto& t = mesh_->triangles[k];
            const double w = sigma_[static_cast<Eigen::Index>(k)] * area_[static_cast<Eigen::Index>(k)];
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    trip.emplace_back(t[i], t[j],
                                      w * (shape_grad_[k][i][0] * shape_grad_[k][j][0] +
                                           shape_grad_[k][i][1] * shape_grad_[k][j][1]));
        }

        // Electrode coupling in the unreduced (u, U) form, then mapped through N.
        Eigen::MatrixXd a_u_e = Eigen::MatrixXd::Zero(n, c);
        Eigen::VectorXd a_e_e = Eigen::VectorXd::Zero(c);
        for (const auto& s : segments_) {
            const double y = sigma_[s.element] / layout_.contact_impedance[s.electrode];
            trip.emplace_back(s.node_a, s.node_a, y * s.m_aa);
            trip.emplace_back(s.node_a, s.node_b, y * s.m_ab);
            trip.emplace_back(s.node_b, s.node_a, y * s.m_ab);
            trip.emplace_back(s.node_b, s.node_b, y * s.m_bb);
            a_u_e(s.node_a, s.electrode) -= y * s.b_a;
            a_u_e(s.node_b, s.electrode) -= y * s.b_b;
            a_e_e[s.electrode] += y * s.length;
        }
        for (Eigen::Index k = 1; k < c; ++k) {
            for (Eigen::Index node = 0; node < n; ++node) {
                const double v = a_u_e(node, 0) - a_u_e(node, k);
                if (v != 0.0) {
                    trip.emplace_back(node, n + k - 1, v);
                    trip.emplace_back(n + k - 1, node, v);
                }
            }
            for (Eigen::Index q = 1; q < c; ++q)
                trip.emplace_back(n + k - 1, n + q - 1, a_e_e[0] + (k == q ? a_e_e[k] : 0.0));
        }

        Eigen::SparseMatrix<double> a(n + c - 1, n + c - 1);
        a.setFromTriplets(trip.begin(), trip.end());
        llt_.compute(a);
        if (llt_.info() != Eigen::Success)
            throw NumericalError("forward model: system matrix is not positive definite");
    }

    const Mesh* mesh_;
    Conductivity sigma_;
    ElectrodeLayout layout_;
    Eigen::VectorXd area_;
    std::vector<std::array<std::array<double, 2>, 3>> shape_grad_;
    std::vector<detail::ContactSegment> segments_;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
};

/// Boundary voltages for every measurement of `protocol`.
inline Eigen::VectorXd solve_forward(const Mesh& mesh, const Conductivity& sigma,
                                     const ElectrodeLayout& layout, const Protocol& protocol,
                                     double amplitude = 1.0) {
    return ForwardModel(mesh, sigma, layout).measure(protocol, amplitude);
}

inline Jacobian compute_jacobian(const Mesh& mesh, const Conductivity& sigma0,
                                 const ElectrodeLayout& layout, const Protocol& protocol) {
    return ForwardModel(mesh, sigma0, layout).jacobian(protocol);
}

}  // namespace eitpod
