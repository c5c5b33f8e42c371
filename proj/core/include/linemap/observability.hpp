#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>

#include "linemap/factors.hpp"
#include "linemap/geometry.hpp"

namespace linemap {

inline constexpr double kRankTolRatio = 1e-8;

// Per-line Fisher information in the 4-DoF orthonormal tangent space of the
// observing camera frame (poses conditioned on / known).
struct FimReport {
    Eigen::Matrix4d H_line = Eigen::Matrix4d::Zero();
    Eigen::Matrix4d H_vp = Eigen::Matrix4d::Zero();
    Eigen::Matrix4d H_total = Eigen::Matrix4d::Zero();
    int rank_line = 0;
    int rank_vp = 0;
    int rank_total = 0;
    // singular values of H_line, H_vp, H_total, descending
    std::array<Eigen::Vector4d, 3> singular_values{};
    bool slope_degenerate = false;
};

// Jacobian of the line residual with respect to the orthonormal increment of
// the line hosted in the observing camera frame. Column 0 is structurally
// zero: the residual sees only the camera-frame normal, and the first
// rotation axis moves only the direction.
Eigen::Matrix<double, 2, 4> line_jacobian_do(const OrthonormalLine& O_camera,
                                             const Segment2D& obs, const Intrinsics& K = {});

// Same for the vanishing point residual; column 1 is structurally zero.
Eigen::Matrix<double, 2, 4> vp_jacobian_do(const OrthonormalLine& O_camera,
                                           const Intrinsics& K = {});

Eigen::Matrix4d line_fim(const Eigen::Matrix<double, 2, 4>& J, const Eigen::Matrix2d& Omega);

FimReport stacked_fim(const Eigen::Matrix<double, 2, 4>& J_line,
                      const Eigen::Matrix<double, 2, 4>& J_vp, const Eigen::Matrix2d& Omega_l,
                      const Eigen::Matrix2d& Omega_v);

// Count of singular values above tol_ratio times the largest; 0 for M = 0.
int numeric_rank(const Eigen::MatrixXd& M, double tol_ratio = kRankTolRatio);

// True when the observed segment slope matches the re-projected line's
// coefficient ratio l2/l1 (cross-multiplied, so l1 = 0 needs no branch).
bool is_slope_degenerate(const Eigen::Vector3d& l, const Eigen::Vector2d& p_s,
                         const Eigen::Vector2d& p_e, double tol = 1e-9);

// One line observed from one camera, everything expressed in that camera.
struct LineFrameObservation {
    OrthonormalLine line_in_camera;
    Segment2D segment;
    std::optional<Eigen::Vector2d> vp;  // nullopt: no vanishing point measurement
    Intrinsics K{};
};

FimReport analyze_line(const LineFrameObservation& obs,
                       const Eigen::Matrix2d& Omega_l = Eigen::Matrix2d::Identity(),
                       const Eigen::Matrix2d& Omega_v = Eigen::Matrix2d::Identity(),
                       double slope_tol = 1e-9);

}  // namespace linemap
