#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "eitpod/error.hpp"
#include "eitpod/fem.hpp"
#include "eitpod/mesh.hpp"
#include "eitpod/pod.hpp"
#include "eitpod/protocol.hpp"

namespace eitpod {

/// POD modes pulled back onto mesh elements: M x P.
struct MeshPod {
    Eigen::MatrixXd matrix;
    std::string source_basis;
    std::string reference_jacobian;  // protocol_id:layout_id of the Jacobian used
};

struct PlacementScore {
    std::vector<int> slots;
    double log_score = -std::numeric_limits<double>::infinity();
    std::size_t rank = 0;  // 1-based, descending score

    bool rank_deficient() const { return !std::isfinite(log_score); }
};

enum class ScoreMode {
    MeshGram,       // 0.5 log det(A^T A), A = J_cand * Phi_M
    DataSpaceGram,  // 0.5 log det(Phi^T J_cand J_cand^T Phi); needs D_cand == D
};

inline MeshPod mesh_pod(const Jacobian& j_ref, const PodBasis& basis, Eigen::Index p) {
    detail::require(j_ref.matrix.rows() == basis.dimension(),
                    "mesh_pod: Jacobian rows must equal basis dimension");
    detail::require(p >= 1 && p <= basis.rank(), "mesh_pod: P must be in [1, R]");
    MeshPod out;
    out.matrix = j_ref.matrix.transpose() * basis.modes.leftCols(p);
    out.source_basis = basis_id(basis);
    out.reference_jacobian = j_ref.protocol_id + ":" + j_ref.layout_id;
    return out;
}

namespace detail {

// Sum of log singular values; -inf when numerically rank deficient.
inline double log_volume(const Eigen::MatrixXd& a) {
    detail::require(a.allFinite(), "sensitivity: non-finite entries");
    const Eigen::Index k = std::min(a.rows(), a.cols());
    if (k == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& s = svd.singularValues();
    const double tol = static_cast<double>(std::max(a.rows(), a.cols())) *
                       std::numeric_limits<double>::epsilon() * s[0];
    if (!(s[0] > 0.0) || s[k - 1] <= tol) return -std::numeric_limits<double>::infinity();
    return s.head(k).array().log().sum();
}

}  // namespace detail

/// log S with S = sqrt(det(J J^T)).
inline double sensitivity(const Eigen::MatrixXd& j) {
    detail::require(j.rows() <= j.cols(), "sensitivity: need D <= M");
    return detail::log_volume(j);
}

/// log S_phi: half the log Gram determinant of the candidate rows in POD coordinates.
inline double pod_sensitivity(const Eigen::MatrixXd& j_cand, const MeshPod& mp) {
    detail::require(j_cand.cols() == mp.matrix.rows(), "pod_sensitivity: element count mismatch");
    detail::require(mp.matrix.cols() <= j_cand.rows(), "pod_sensitivity: P exceeds candidate measurements");
    return detail::log_volume(j_cand * mp.matrix);
}

inline double data_space_sensitivity(const Eigen::MatrixXd& j_cand, const PodBasis& basis, Eigen::Index p) {
    detail::require(j_cand.rows() == basis.dimension(),
                    "data_space_sensitivity: candidate measurement count must equal basis dimension");
    detail::require(p >= 1 && p <= basis.rank() && p <= j_cand.cols(), "data_space_sensitivity: bad P");
    return detail::log_volume(j_cand.transpose() * basis.modes.leftCols(p));
}

inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return r;
}

/// Lexicographic stream of k-subsets of {0, ..., n-1}.
class CombinationStream {
public:
    CombinationStream(int n, int k) : n_(n), k_(k) {
        detail::require(k >= 0 && k <= n, "enumerate_candidates: select must be <= slot_count");
        for (int i = 0; i < k; ++i) current_.push_back(i);
    }

    std::optional<std::vector<int>> next() {
        if (done_) return std::nullopt;
        std::vector<int> out = current_;
        int i = k_ - 1;
        while (i >= 0 && current_[i] == n_ - k_ + i) --i;
        if (i < 0) {
            done_ = true;
        } else {
            ++current_[i];
            for (int j = i + 1; j < k_; ++j) current_[j] = current_[j - 1] + 1;
        }
        return out;
    }

private:
    int n_, k_;
    std::vector<int> current_;
    bool done_ = false;
};

inline std::vector<std::vector<int>> enumerate_candidates(int slot_count, int select) {
    CombinationStream stream(slot_count, select);
    std::vector<std::vector<int>> out;
    out.reserve(binomial(slot_count, select));
    while (auto c = stream.next()) out.push_back(std::move(*c));
    return out;
}

struct PlacementOptions {
    ScoreMode mode = ScoreMode::MeshGram;
    unsigned threads = 0;  // 0: hardware concurrency
};

/// Sorts by descending log score, ties by lexicographically smallest slot set,
/// and assigns 1-based ranks.
inline void rank_scores(std::vector<PlacementScore>& scores) {
    std::sort(scores.begin(), scores.end(), [](const PlacementScore& a, const PlacementScore& b) {
        if (a.log_score != b.log_score) return a.log_score > b.log_score;
        return a.slots < b.slots;
    });
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i].rank = i + 1;
}

/// Exhaustive search over every `select`-of-`slot_count` electrode placement.
///
/// The mesh POD matrix comes from the reference layout's skip-protocol
/// Jacobian; every candidate is scored with its own skip-protocol Jacobian
/// on the same mesh and a homogeneous background.
inline std::vector<PlacementScore> optimize_placement(const Mesh& mesh, const PodBasis& basis,
                                                      const ElectrodeLayout& reference_layout,
                                                      int slot_count, int select, Eigen::Index p,
                                                      const PlacementOptions& opts = {}) {
    detail::require(select >= 5, "optimize_placement: select must be >= 5");
    detail::require(select <= slot_count, "optimize_placement: select must be <= slot_count");
    const Protocol ref_protocol = skip_protocol(static_cast<int>(reference_layout.size()));
    if (!basis.protocol_id.empty() && basis.protocol_id != protocol_id(ref_protocol))
        throw DataError("optimize_placement: basis protocol does not match the reference layout");
    const Protocol cand_protocol = skip_protocol(select);
    detail::require(p <= static_cast<Eigen::Index>(cand_protocol.size()),
                    "optimize_placement: P exceeds candidate measurement count");
    if (opts.mode == ScoreMode::DataSpaceGram)
        detail::require(cand_protocol.size() == ref_protocol.size(),
                        "optimize_placement: data-space score needs candidate D equal to basis D");

    const Conductivity background = Conductivity::uniform(mesh, 1.0);
    const Jacobian j_ref = compute_jacobian(mesh, background, reference_layout, ref_protocol);
    const MeshPod mp = mesh_pod(j_ref, basis, p);

    const auto candidates = enumerate_candidates(slot_count, select);
    std::vector<PlacementScore> scores(candidates.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        try {
            for (std::size_t i = next++; i < candidates.size(); i = next++) {
                const ElectrodeLayout lay =
                    layout_from_slots(slot_count, candidates[i], reference_layout.half_width,
                                      reference_layout.contact_impedance.front());
                const Jacobian j = compute_jacobian(mesh, background, lay, cand_protocol);
                scores[i].slots = candidates[i];
                scores[i].log_score = opts.mode == ScoreMode::MeshGram
                                          ? pod_sensitivity(j.matrix, mp)
                                          : data_space_sensitivity(j.matrix, basis, p);
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = candidates.size();
        }
    };
    unsigned n_threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, candidates.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    rank_scores(scores);
    if (scores.empty() || scores.front().rank_deficient())
        throw NumericalError("optimize_placement: every candidate is rank deficient");
    return scores;
}

inline nlohmann::json to_json(const PlacementScore& s) {
    nlohmann::json j{{"slots", s.slots}, {"rank", s.rank}};
    if (s.rank_deficient()) {
        j["log_score"] = nullptr;
        j["rank_deficient"] = true;
    } else {
        j["log_score"] = s.log_score;
    }
    return j;
}

}  // namespace eitpod
