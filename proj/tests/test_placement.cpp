#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "eitpod/placement.hpp"
#include "eitpod/synth.hpp"
#include "support.hpp"

using namespace eitpod;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

MeshPod raw_mesh_pod(const Eigen::MatrixXd& m) { return {m, "", ""}; }

// Small placement problem on the coarse mesh: 16 slots, choose 5, P = 5.
struct SmallProblem {
    Mesh mesh = support::coarse_mesh();
    ElectrodeLayout reference = support::reference_layout();
    Protocol protocol = skip_protocol(8);
    SnapshotMatrix frames;

    explicit SmallProblem(double scale = 1.0) {
        frames = simulate_session(mesh, reference, protocol, default_session(30, 4)).frames;
        frames.frames *= scale;
    }
};

}  // namespace

TEST(MeshPodMatrix, IdentityBasisCopiesJacobianRows) {
    const Eigen::MatrixXd jm = support::gaussian(6, 11, 1);
    Jacobian j{jm, {}, "p", "l"};
    PodBasis b;
    b.modes = Eigen::MatrixXd::Identity(6, 6);
    b.eigenvalues = Eigen::VectorXd::Ones(6);
    const MeshPod mp = mesh_pod(j, b, 6);
    ASSERT_EQ(mp.matrix.rows(), 11);
    ASSERT_EQ(mp.matrix.cols(), 6);
    for (Eigen::Index i = 0; i < 6; ++i) EXPECT_EQ(mp.matrix.col(i), jm.row(i).transpose());
    EXPECT_EQ(mp.reference_jacobian, "p:l");
}

TEST(MeshPodMatrix, ZeroModeGivesZeroColumn) {
    Jacobian j{support::gaussian(4, 9, 2), {}, "", ""};
    PodBasis b;
    b.modes = Eigen::MatrixXd::Zero(4, 2);
    b.modes(1, 0) = 1.0;
    b.eigenvalues = Eigen::VectorXd::Ones(2);
    const MeshPod mp = mesh_pod(j, b, 2);
    EXPECT_EQ(mp.matrix.col(1).norm(), 0.0);
    EXPECT_THROW(mesh_pod(j, b, 3), InvalidArgument);
    Jacobian wrong{support::gaussian(5, 9, 2), {}, "", ""};
    EXPECT_THROW(mesh_pod(wrong, b, 1), InvalidArgument);
}

TEST(Sensitivity, PaddedIdentityIsOne) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(5, 12);
    j.leftCols(5).setIdentity();
    EXPECT_NEAR(sensitivity(j), 0.0, 1e-15);
}

TEST(Sensitivity, ScalingAddsDLogAlpha) {
    const Eigen::MatrixXd j = support::gaussian(5, 12, 3);
    for (double alpha : {1e-3, 0.5, 7.0, 1e4})
        EXPECT_NEAR(sensitivity(alpha * j), sensitivity(j) + 5.0 * std::log(alpha), 1e-10);
}

// Oracle: dense LU determinant of J J^T.
TEST(Sensitivity, MatchesNaiveDeterminant) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Eigen::MatrixXd j = support::gaussian(5, 12, seed);
        const double naive = std::sqrt((j * j.transpose()).fullPivLu().determinant());
        EXPECT_NEAR(std::exp(sensitivity(j)) / naive, 1.0, 1e-8);
    }
}

TEST(Sensitivity, LogSpaceSurvivesOverflow) {
    // det(J J^T) = 1e600 would overflow a double; the log does not.
    const Eigen::MatrixXd j = 1e30 * Eigen::MatrixXd::Identity(10, 10);
    EXPECT_NEAR(sensitivity(j), 10.0 * std::log(1e30), 1e-9);
}

TEST(Sensitivity, RankDeficientIsMinusInfinity) {
    Eigen::MatrixXd j = support::gaussian(4, 10, 5);
    j.row(3) = j.row(1);
    EXPECT_EQ(sensitivity(j), kNegInf);
    EXPECT_THROW(sensitivity(support::gaussian(6, 4, 1)), InvalidArgument);
    j(0, 0) = std::nan("");
    EXPECT_THROW(sensitivity(j), InvalidArgument);
}

TEST(PodSensitivity, OrthonormalColumnsGiveZero) {
    const Eigen::MatrixXd q = support::orthonormal(7, 3, 8);
    Eigen::MatrixXd j_cand = support::gaussian(7, 10, 9);
    j_cand.leftCols(3) = q;
    Eigen::MatrixXd phi_m = Eigen::MatrixXd::Zero(10, 3);
    phi_m.topRows(3).setIdentity();
    EXPECT_NEAR(pod_sensitivity(j_cand, raw_mesh_pod(phi_m)), 0.0, 1e-13);
}

TEST(PodSensitivity, DuplicatedDirectionIsMinusInfinity) {
    Eigen::MatrixXd phi_m = support::gaussian(10, 3, 2);
    phi_m.col(2) = phi_m.col(0);
    EXPECT_EQ(pod_sensitivity(support::gaussian(6, 10, 3), raw_mesh_pod(phi_m)), kNegInf);
}

TEST(PodSensitivity, ZeroModeMakesEveryCandidateDeficient) {
    Eigen::MatrixXd phi_m = support::gaussian(10, 3, 4);
    Eigen::MatrixXd padded(10, 4);
    padded << phi_m, Eigen::VectorXd::Zero(10);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Eigen::MatrixXd j = support::gaussian(6, 10, 50 + s);
        EXPECT_TRUE(std::isfinite(pod_sensitivity(j, raw_mesh_pod(phi_m))));
        EXPECT_EQ(pod_sensitivity(j, raw_mesh_pod(padded)), kNegInf);
    }
}

TEST(PodSensitivity, DimensionChecks) {
    EXPECT_THROW(pod_sensitivity(support::gaussian(6, 9, 1), raw_mesh_pod(support::gaussian(10, 3, 1))),
                 InvalidArgument);
    EXPECT_THROW(pod_sensitivity(support::gaussian(2, 10, 1), raw_mesh_pod(support::gaussian(10, 3, 1))),
                 InvalidArgument);
}

TEST(Enumerate, Counts) {
    EXPECT_EQ(enumerate_candidates(16, 8).size(), 12870u);
    EXPECT_EQ(binomial(16, 8), 12870u);
    EXPECT_EQ(enumerate_candidates(5, 5).size(), 1u);
    EXPECT_EQ(enumerate_candidates(7, 0).size(), 1u);
    EXPECT_THROW(enumerate_candidates(4, 5), InvalidArgument);
}

TEST(Enumerate, LexicographicOrder) {
    const std::vector<std::vector<int>> want{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    EXPECT_EQ(enumerate_candidates(4, 2), want);
    const auto all = enumerate_candidates(12, 5);
    EXPECT_TRUE(std::is_sorted(all.begin(), all.end()));
    EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
}

TEST(RankScores, TiesBreakLexicographically) {
    std::vector<PlacementScore> s{{{2, 3}, 1.0, 0}, {{0, 5}, kNegInf, 0}, {{0, 4}, 1.0, 0}, {{1, 2}, 3.0, 0}};
    rank_scores(s);
    EXPECT_EQ(s[0].slots, (std::vector<int>{1, 2}));
    EXPECT_EQ(s[1].slots, (std::vector<int>{0, 4}));
    EXPECT_EQ(s[2].slots, (std::vector<int>{2, 3}));
    EXPECT_EQ(s[3].slots, (std::vector<int>{0, 5}));
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i].rank, i + 1);
    EXPECT_TRUE(s[3].rank_deficient());
    EXPECT_TRUE(to_json(s[3])["log_score"].is_null());
    EXPECT_DOUBLE_EQ(to_json(s[0])["log_score"].get<double>(), 3.0);
}

// Oracle: direct evaluation on the rotated layout. A two-slot turn maps the
// even-8 reference onto itself, so with a relabel-invariant basis the score
// cannot change.
TEST(PodSensitivity, TwoSlotRotationLeavesScoreUnchanged) {
    const Mesh& m = support::default_mesh();
    const Protocol p = skip_protocol(8);
    const Conductivity bg = Conductivity::uniform(m);
    const Jacobian j_ref = compute_jacobian(m, bg, support::reference_layout(), p);
    const PodBasis basis = support::basis_from_modes(support::onsager_pair_basis(p), p);
    const MeshPod mp = mesh_pod(j_ref, basis, basis.rank());
    const std::vector<int> s{0, 1, 3, 6, 7, 10, 12, 13};
    auto score = [&](int shift) {
        std::vector<int> rot;
        for (int v : s) rot.push_back((v + shift) % 16);
        const auto lay = layout_from_slots(16, rot, default_half_width(16));
        return pod_sensitivity(compute_jacobian(m, bg, lay, p).matrix, mp);
    };
    const double base = score(0);
    ASSERT_TRUE(std::isfinite(base));
    for (int shift = 2; shift < 16; shift += 2) EXPECT_NEAR(score(shift), base, 1e-6 * std::abs(base)) << shift;
}

TEST(Sensitivity, OneSlotRotationLeavesScoreUnchanged) {
    const Mesh& m = support::default_mesh();
    const Protocol p = deduplicate_onsager(skip_protocol(6));
    const Conductivity bg = Conductivity::uniform(m);
    const std::vector<int> s{0, 2, 3, 7, 11, 12};
    auto score = [&](int shift) {
        std::vector<int> rot;
        for (int v : s) rot.push_back((v + shift) % 16);
        const auto lay = layout_from_slots(16, rot, default_half_width(16));
        return sensitivity(compute_jacobian(m, bg, lay, p).matrix);
    };
    const double base = score(0);
    ASSERT_TRUE(std::isfinite(base));
    for (int shift = 1; shift < 16; ++shift) EXPECT_NEAR(score(shift), base, 1e-6 * std::abs(base)) << shift;
}

TEST(Optimize, SortedCompleteAndDeterministic) {
    const SmallProblem sp;
    const PodBasis b = fit_pod(sp.frames);
    PlacementOptions one;
    one.threads = 1;
    PlacementOptions three;
    three.threads = 3;
    const auto a = optimize_placement(sp.mesh, b, sp.reference, 16, 5, 5, one);
    const auto c = optimize_placement(sp.mesh, b, sp.reference, 16, 5, 5, three);
    ASSERT_EQ(a.size(), binomial(16, 5));
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].slots, c[i].slots);
        EXPECT_EQ(a[i].log_score, c[i].log_score);
        EXPECT_EQ(a[i].rank, i + 1);
        if (i) {
            EXPECT_GE(a[i - 1].log_score, a[i].log_score);
        }
    }
    std::set<std::vector<int>> distinct;
    for (const auto& s : a) distinct.insert(s.slots);
    EXPECT_EQ(distinct.size(), a.size());
}

TEST(Optimize, ArgmaxInvariantUnderSnapshotScaling) {
    const SmallProblem base, scaled(250.0);
    const auto a = optimize_placement(base.mesh, fit_pod(base.frames), base.reference, 16, 5, 5);
    const auto b = optimize_placement(scaled.mesh, fit_pod(scaled.frames), scaled.reference, 16, 5, 5);
    EXPECT_EQ(a.front().slots, b.front().slots);
    EXPECT_NEAR(a.front().log_score, b.front().log_score, 1e-8 * std::abs(a.front().log_score));
}

TEST(Optimize, DataSpaceScoreNeedsMatchingDimension) {
    const SmallProblem sp;
    const PodBasis b = fit_pod(sp.frames);
    PlacementOptions data;
    data.mode = ScoreMode::DataSpaceGram;
    EXPECT_THROW(optimize_placement(sp.mesh, b, sp.reference, 16, 5, 5, data), InvalidArgument);
    const auto r = optimize_placement(sp.mesh, b, sp.reference, 9, 8, 5, data);
    EXPECT_EQ(r.size(), 9u);
    EXPECT_TRUE(std::isfinite(r.front().log_score));
}

TEST(Optimize, Preconditions) {
    const SmallProblem sp;
    PodBasis b = fit_pod(sp.frames);
    EXPECT_THROW(optimize_placement(sp.mesh, b, sp.reference, 16, 4, 3), InvalidArgument);
    EXPECT_THROW(optimize_placement(sp.mesh, b, sp.reference, 16, 5, 11), InvalidArgument);
    EXPECT_THROW(optimize_placement(sp.mesh, b, sp.reference, 4, 5, 3), InvalidArgument);
    b.protocol_id = protocol_id(skip_protocol(7));
    EXPECT_THROW(optimize_placement(sp.mesh, b, sp.reference, 16, 5, 5), DataError);
}

TEST(Optimize, ZeroVarianceModeFailsEveryCandidate) {
    const SmallProblem sp;
    PodBasis b = fit_pod(sp.frames, false, 4);
    b.modes.conservativeResize(Eigen::NoChange, 5);
    b.modes.col(4).setZero();
    b.eigenvalues.conservativeResize(5);
    b.eigenvalues[4] = 0.0;
    EXPECT_THROW(optimize_placement(sp.mesh, b, sp.reference, 10, 5, 5), NumericalError);
}
