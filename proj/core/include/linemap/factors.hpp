#pragma once

#include <Eigen/Core>

#include "linemap/geometry.hpp"

namespace linemap {

inline constexpr double kEpsV3 = 1e-6;        // |v3| at or below: vanishing point at infinity
inline constexpr double kLineAtInfinityTol = 1e-12;  // sqrt(l1^2 + l2^2) threshold
inline constexpr double kVirtualFocal = 460.0;       // pixel <-> normalized-plane conversion

// Pinhole intrinsics on the normalized-plane convention; identity by default.
struct Intrinsics {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;

    Eigen::Matrix3d K() const;
    // Line projection matrix fx*fy*K^-T.
    Eigen::Matrix3d K_line() const;
};

struct LineResidualEval {
    Eigen::Vector2d r = Eigen::Vector2d::Zero();
    Eigen::Matrix<double, 2, 6> J_pose = Eigen::Matrix<double, 2, 6>::Zero();  // d(p), d(theta)
    Eigen::Matrix<double, 2, 4> J_line = Eigen::Matrix<double, 2, 4>::Zero();  // d(psi), d(phi)
};

struct VpResidualEval {
    Eigen::Vector2d r = Eigen::Vector2d::Zero();
    Eigen::Matrix<double, 2, 6> J_pose = Eigen::Matrix<double, 2, 6>::Zero();
    Eigen::Matrix<double, 2, 4> J_line = Eigen::Matrix<double, 2, 4>::Zero();
};

enum class LossKind { huber, arctan };

struct RobustLoss {
    LossKind kind = LossKind::huber;
    double scale = 1.5;  // huber delta or arctan bound, in whitened-residual units
};

// rho(s) and d rho / d s for the squared whitened norm s.
struct LossEval {
    double rho = 0.0;
    double drho = 1.0;
};

// Re-projected image line l = K' * n_c; with identity intrinsics this is n_c.
Eigen::Vector3d project_line(const PluckerLine& L_camera, const Intrinsics& K = {});

// Signed distances of the two observed endpoints to the re-projected line.
Eigen::Vector2d line_residual(const Eigen::Vector3d& l, const Eigen::Vector2d& p_s,
                              const Eigen::Vector2d& p_e);

// d(line_residual)/d(l), with the observations lifted to homogeneous points.
Eigen::Matrix<double, 2, 3> line_residual_jacobian(const Eigen::Vector3d& l,
                                                   const Eigen::Vector2d& p_s,
                                                   const Eigen::Vector2d& p_e);

// Full line-factor evaluation: residual plus analytic Jacobians with respect
// to the observing body pose increment (dp, dtheta; R <- R Exp(dtheta)) and
// the world-frame orthonormal line increment (dpsi, dphi).
LineResidualEval line_jacobian(const CameraPose& state, const OrthonormalLine& O_world,
                               const Segment2D& obs, const Intrinsics& K = {});

// Vanishing point of a camera-frame line: v = K d_c and its dehomogenization.
struct VpProjection {
    Eigen::Vector3d v;
    Eigen::Vector2d p_v_hat;
};
VpProjection vp_project(const PluckerLine& L_camera, const Intrinsics& K = {});

Eigen::Vector2d vp_residual(const Eigen::Vector2d& p_v, const Eigen::Vector3d& v);

Eigen::Matrix<double, 2, 3> vp_residual_jacobian(const Eigen::Vector3d& v);

VpResidualEval vp_jacobian(const CameraPose& state, const OrthonormalLine& O_world,
                           const Eigen::Vector2d& p_v, const Intrinsics& K = {});

LossEval robust_weight(const RobustLoss& loss, double squared_norm);

}  // namespace linemap
