#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "linemap/observability.hpp"
#include "support/test_utils.hpp"

using namespace linemap;
using namespace linemap::testing;

namespace {

// camera-frame line with a well-conditioned chart and a usable direction
OrthonormalLine random_camera_line(std::mt19937_64& rng) {
    for (;;) {
        const PluckerLine L = random_plucker_line(rng);
        if (std::abs(L.d.normalized().z()) < 0.05) continue;
        return to_orthonormal(L);
    }
}

Segment2D random_segment(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (;;) {
        Segment2D s{{u(rng), u(rng)}, {u(rng), u(rng)}, 0};
        if (s.length() > 0.05) return s;
    }
}

Eigen::Matrix2d random_spd(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Matrix2d A;
    A << u(rng), u(rng), u(rng), u(rng);
    return A * A.transpose() + 0.5 * Eigen::Matrix2d::Identity();
}

}  // namespace

TEST_CASE("line_fim zero column propagates to a zero row and column") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        Eigen::Matrix<double, 2, 4> J;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 4; ++c) J(r, c) = u(rng);
        J.col(0).setZero();
        const Eigen::Matrix4d H = line_fim(J, random_spd(rng));
        CHECK(H.row(0).cwiseAbs().maxCoeff() == 0.0);
        CHECK(H.col(0).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("line_fim with orthonormal rows and identity weight is idempotent") {
    Eigen::Matrix<double, 2, 4> J;
    J << 1, 0, 0, 0, 0, 0, 1, 0;
    const Eigen::Matrix4d H = line_fim(J, Eigen::Matrix2d::Identity());
    CHECK((H * H - H).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("line_fim rank equals the Jacobian rank for SPD weights") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        Eigen::Matrix<double, 2, 4> J;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 4; ++c) J(r, c) = u(rng);
        if (i % 3 == 0) J.row(1) = 2.5 * J.row(0);  // force rank 1 sometimes
        const Eigen::Matrix4d H = line_fim(J, random_spd(rng));
        CHECK(numeric_rank(H) == numeric_rank(J));
    }
}

TEST_CASE("numeric_rank basics") {
    CHECK(numeric_rank(Eigen::Matrix4d::Identity()) == 4);
    CHECK(numeric_rank(Eigen::Matrix4d::Zero()) == 0);

    const Eigen::Vector4d a(1, -2, 0.5, 3), b(0.1, 4, -1, 2);
    CHECK(numeric_rank(a * b.transpose()) == 1);
}

TEST_CASE("numeric_rank matches constructed ranks") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> pick_rank(0, 4);
    std::uniform_real_distribution<double> mag(0.5, 2.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const int r = pick_rank(rng);
        Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
        const Eigen::Matrix3d R1 = random_rotation(rng);
        const Eigen::Matrix3d R2 = random_rotation(rng);
        Eigen::Matrix4d U = Eigen::Matrix4d::Identity();
        U.topLeftCorner<3, 3>() = R1;
        Eigen::Matrix4d V = Eigen::Matrix4d::Identity();
        V.bottomRightCorner<3, 3>() = R2;
        for (int k = 0; k < r; ++k) {
            M += mag(rng) * U.col(k) * V.col(k).transpose();
        }
        CHECK(numeric_rank(M) == r);
    }
}

TEST_CASE("slope degeneracy detection") {
    CHECK(is_slope_degenerate({1, 1, 0}, {0, 0}, {1, 1}));
    CHECK_FALSE(is_slope_degenerate({1, -1, 0}, {0, 0}, {1, 1}));
    // vertical segment with l1 = 0: both sides vanish under cross-multiplication
    CHECK(is_slope_degenerate({0, 1, 0}, {0.3, 0}, {0.3, 1}));
}

TEST_CASE("structural zero columns are exact in the camera-hosted chart") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 1000; ++i) {
        const OrthonormalLine O = random_camera_line(rng);
        const Segment2D obs = random_segment(rng);
        const Eigen::Matrix<double, 2, 4> J_l = line_jacobian_do(O, obs);
        const Eigen::Matrix<double, 2, 4> J_v = vp_jacobian_do(O);
        CHECK(J_l.col(0).cwiseAbs().maxCoeff() == 0.0);
        CHECK(J_v.col(1).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("camera-hosted chart agrees with the factor chain at identity pose") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const OrthonormalLine O = random_camera_line(rng);
        const Segment2D obs = random_segment(rng);
        const CameraPose identity;
        const LineResidualEval ev = line_jacobian(identity, O, obs);
        CHECK(rel_inf_error(line_jacobian_do(O, obs), ev.J_line) < 1e-12);

        const Eigen::Vector2d p_v(0.1, 0.2);
        const VpResidualEval vev = vp_jacobian(identity, O, p_v);
        CHECK(rel_inf_error(vp_jacobian_do(O), vev.J_line) < 1e-12);
    }
}

TEST_CASE("single-view stacked information has rank 3: only the depth slide stays blind") {
    // One image line fixes the interpretation plane (2 DoF) and the vanishing
    // point fixes the direction (2 DoF), but both residuals are homogeneous,
    // so the distance coordinate - which rescales n and d proportionally - is
    // invisible to the pair. The joint rank is exactly 3, and the null
    // direction is the phi axis of the camera-hosted chart.
    std::mt19937_64 rng(6);
    int generic = 0;
    while (generic < 200) {
        const OrthonormalLine O = random_camera_line(rng);
        const Segment2D obs = random_segment(rng);
        const Eigen::Vector3d l = project_line(to_plucker(O, Frame::camera));
        if (is_slope_degenerate(l, obs.p_s, obs.p_e, 1e-3)) continue;  // stay generic

        const Eigen::Matrix<double, 2, 4> J_l = line_jacobian_do(O, obs);
        const Eigen::Matrix<double, 2, 4> J_v = vp_jacobian_do(O);
        // the phi column cancels analytically (scale invariance), to round-off
        const double scale_l = std::max(1.0, J_l.cwiseAbs().maxCoeff());
        const double scale_v = std::max(1.0, J_v.cwiseAbs().maxCoeff());
        CHECK(J_l.col(3).cwiseAbs().maxCoeff() < 1e-12 * scale_l);
        CHECK(J_v.col(3).cwiseAbs().maxCoeff() < 1e-12 * scale_v);

        const FimReport rep = stacked_fim(J_l, J_v, random_spd(rng), random_spd(rng));
        CHECK(rep.rank_line == 2);
        CHECK(rep.rank_vp == 2);
        CHECK(rep.rank_total == 3);
        CHECK(rep.rank_total >= std::max(rep.rank_line, rep.rank_vp));
        CHECK((rep.H_total * Eigen::Vector4d::UnitW()).norm() <
              1e-10 * std::max(1.0, rep.H_total.norm()));

        // positive semidefinite up to round-off
        for (const Eigen::Matrix4d& H : {rep.H_line, rep.H_vp, rep.H_total}) {
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(H);
            CHECK(eig.eigenvalues().minCoeff() > -1e-10 * std::max(1.0, H.norm()));
        }
        ++generic;
    }
}

TEST_CASE("a second view closes the last line degree of freedom") {
    std::mt19937_64 rng(16);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    int checked = 0;
    while (checked < 50) {
        const PluckerLine L = random_plucker_line(rng);
        if (std::abs(L.d.normalized().z()) < 0.1) continue;
        const OrthonormalLine O_world = to_orthonormal(L);

        CameraPose pose_a = random_camera_pose(rng, false);
        CameraPose pose_b = random_camera_pose(rng, false);
        if ((pose_a.p - pose_b.p).norm() < 0.3) continue;

        const Segment2D obs{{u(rng), u(rng)}, {u(rng), u(rng)}, 0};
        if (obs.length() < 0.05) continue;
        Eigen::Matrix<double, 2, 4> Ja, Jb, Jv;
        try {
            Ja = line_jacobian(pose_a, O_world, obs).J_line;
            Jb = line_jacobian(pose_b, O_world, obs).J_line;
            Jv = vp_jacobian(pose_a, O_world, Eigen::Vector2d(u(rng), u(rng))).J_line;
        } catch (const Error&) {
            continue;
        }

        // one line observation + the vanishing point: still rank 3
        Eigen::Matrix4d H_single = Ja.transpose() * Ja + Jv.transpose() * Jv;
        CHECK(numeric_rank(H_single) <= 3);

        // two line observations from distinct centers: rank 4
        Eigen::Matrix4d H_two = Ja.transpose() * Ja + Jb.transpose() * Jb;
        if (numeric_rank(H_two) < 4) continue;  // skip near-degenerate pairs
        CHECK(numeric_rank(H_two) == 4);
        ++checked;
    }
}

TEST_CASE("slope-degenerate observations drop the endpoint-distance rank to 1") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int i = 0; i < 200; ++i) {
        const OrthonormalLine O = random_camera_line(rng);
        const Eigen::Vector3d l = project_line(to_plucker(O, Frame::camera));
        // segment direction parallel to (l1, l2): the degenerate slope
        const Eigen::Vector2d dir = Eigen::Vector2d(l.x(), l.y()).normalized();
        Segment2D obs;
        obs.p_s = Eigen::Vector2d(u(rng), u(rng));
        obs.p_e = obs.p_s + 0.4 * dir;
        CHECK(is_slope_degenerate(l, obs.p_s, obs.p_e, 1e-9));
        const Eigen::Matrix<double, 2, 3> dr_dl = line_residual_jacobian(l, obs.p_s, obs.p_e);
        CHECK(numeric_rank(dr_dl) == 1);
    }
}

TEST_CASE("interior observations never raise the line-only rank above 2") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> alpha(0.05, 0.95);
    for (int i = 0; i < 200; ++i) {
        const OrthonormalLine O = random_camera_line(rng);
        const Segment2D obs = random_segment(rng);
        const Eigen::Matrix<double, 2, 4> J = line_jacobian_do(O, obs);

        const double a = alpha(rng);
        const Eigen::Vector2d p_l = a * obs.p_s + (1.0 - a) * obs.p_e;
        Segment2D with_interior;
        with_interior.p_s = obs.p_s;
        with_interior.p_e = p_l;
        const Eigen::Matrix<double, 2, 4> J_aux = line_jacobian_do(O, with_interior);

        Eigen::Matrix<double, 3, 4> stacked;
        stacked.topRows<2>() = J;
        stacked.row(2) = J_aux.row(1);  // the interior point's row
        CHECK(numeric_rank(stacked) <= 2);
    }
}

TEST_CASE("analyze_line reports per-measurement availability") {
    std::mt19937_64 rng(9);
    const OrthonormalLine O = random_camera_line(rng);
    const Segment2D obs = random_segment(rng);

    LineFrameObservation with_vp{O, obs, Eigen::Vector2d(0.2, -0.1), Intrinsics{}};
    const FimReport full = analyze_line(with_vp);
    CHECK(full.rank_total == 3);
    CHECK(full.rank_vp == 2);

    LineFrameObservation line_only{O, obs, std::nullopt, Intrinsics{}};
    const FimReport partial = analyze_line(line_only);
    CHECK(partial.rank_vp == 0);
    CHECK(partial.H_vp.cwiseAbs().maxCoeff() == 0.0);
    CHECK(partial.rank_line <= 2);
    CHECK(partial.rank_total == partial.rank_line);
    CHECK(partial.singular_values[0][0] >= partial.singular_values[0][3]);
}
