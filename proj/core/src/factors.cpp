#include "linemap/factors.hpp"

#include <cmath>

namespace linemap {

Eigen::Matrix3d Intrinsics::K() const {
    Eigen::Matrix3d K;
    K << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return K;
}

Eigen::Matrix3d Intrinsics::K_line() const {
    Eigen::Matrix3d Kp;
    Kp << fy, 0, 0, 0, fx, 0, -fy * cx, -fx * cy, fx * fy;
    return Kp;
}

Eigen::Vector3d project_line(const PluckerLine& L_camera, const Intrinsics& K) {
    return K.K_line() * L_camera.n;
}

Eigen::Vector2d line_residual(const Eigen::Vector3d& l, const Eigen::Vector2d& p_s,
                              const Eigen::Vector2d& p_e) {
    const double l_d = std::hypot(l.x(), l.y());
    if (l_d <= kLineAtInfinityTol) {
        throw DegenerateLine("re-projected line is at infinity");
    }
    const Eigen::Vector3d hs(p_s.x(), p_s.y(), 1.0);
    const Eigen::Vector3d he(p_e.x(), p_e.y(), 1.0);
    return {hs.dot(l) / l_d, he.dot(l) / l_d};
}

Eigen::Matrix<double, 2, 3> line_residual_jacobian(const Eigen::Vector3d& l,
                                                   const Eigen::Vector2d& p_s,
                                                   const Eigen::Vector2d& p_e) {
    const double l_d2 = l.x() * l.x() + l.y() * l.y();
    const double l_d = std::sqrt(l_d2);
    if (l_d <= kLineAtInfinityTol) {
        throw DegenerateLine("re-projected line is at infinity");
    }
    const double l_d3 = l_d2 * l_d;
    const Eigen::Vector3d hs(p_s.x(), p_s.y(), 1.0);
    const Eigen::Vector3d he(p_e.x(), p_e.y(), 1.0);
    const double es = hs.dot(l), ee = he.dot(l);
    Eigen::Matrix<double, 2, 3> J;
    J << -l.x() * es / l_d3 + p_s.x() / l_d, -l.y() * es / l_d3 + p_s.y() / l_d, 1.0 / l_d,
         -l.x() * ee / l_d3 + p_e.x() / l_d, -l.y() * ee / l_d3 + p_e.y() / l_d, 1.0 / l_d;
    return J;
}

namespace {

// d L_body / d (dp, dtheta) for the body-frame line of a world line under
// p <- p + dp, R <- R Exp(dtheta).
Eigen::Matrix<double, 6, 6> body_line_pose_jacobian(const CameraPose& state,
                                                    const PluckerLine& L_world) {
    const Eigen::Matrix3d Rt = state.R.transpose();
    const Eigen::Vector3d n_b = Rt * (L_world.n + L_world.d.cross(state.p));
    const Eigen::Vector3d d_b = Rt * L_world.d;
    Eigen::Matrix<double, 6, 6> J = Eigen::Matrix<double, 6, 6>::Zero();
    J.block<3, 3>(0, 0) = Rt * skew(L_world.d);
    J.block<3, 3>(0, 3) = skew(n_b);
    J.block<3, 3>(3, 3) = skew(d_b);
    return J;
}

struct Chain {
    PluckerLine L_world;
    PluckerLine L_camera;
    Eigen::Matrix<double, 6, 6> dLc_dpose;   // through the extrinsic
    Eigen::Matrix<double, 6, 4> dLc_dline;   // world->camera transform times orthonormal jacobian
};

Chain evaluate_chain(const CameraPose& state, const OrthonormalLine& O_world) {
    Chain c;
    c.L_world = to_plucker(O_world, Frame::world);
    c.L_camera = transform_line(c.L_world, state);
    const Matrix6d inv_extrinsic = plucker_transform_matrix(state.extrinsic);
    c.dLc_dpose = inv_extrinsic * body_line_pose_jacobian(state, c.L_world);
    const Matrix6d world_to_camera = plucker_transform_matrix(state.camera_in_world());
    c.dLc_dline = world_to_camera * orthonormal_jacobian(O_world);
    return c;
}

}  // namespace

LineResidualEval line_jacobian(const CameraPose& state, const OrthonormalLine& O_world,
                               const Segment2D& obs, const Intrinsics& K) {
    const Chain c = evaluate_chain(state, O_world);
    const Eigen::Vector3d l = project_line(c.L_camera, K);

    LineResidualEval out;
    out.r = line_residual(l, obs.p_s, obs.p_e);
    const Eigen::Matrix<double, 2, 3> dr_dl = line_residual_jacobian(l, obs.p_s, obs.p_e);
    // l depends on the camera-frame normal only
    const Eigen::Matrix<double, 2, 3> dr_dn = dr_dl * K.K_line();
    out.J_pose = dr_dn * c.dLc_dpose.topRows<3>();
    out.J_line = dr_dn * c.dLc_dline.topRows<3>();
    return out;
}

VpProjection vp_project(const PluckerLine& L_camera, const Intrinsics& K) {
    const Eigen::Vector3d v = K.K() * L_camera.d;
    if (std::abs(v.z()) <= kEpsV3) {
        throw VpAtInfinity("line direction is parallel to the image plane");
    }
    return {v, {v.x() / v.z(), v.y() / v.z()}};
}

Eigen::Vector2d vp_residual(const Eigen::Vector2d& p_v, const Eigen::Vector3d& v) {
    if (std::abs(v.z()) <= kEpsV3) {
        throw VpAtInfinity("vanishing point estimate at infinity");
    }
    return p_v - Eigen::Vector2d(v.x() / v.z(), v.y() / v.z());
}

Eigen::Matrix<double, 2, 3> vp_residual_jacobian(const Eigen::Vector3d& v) {
    if (std::abs(v.z()) <= kEpsV3) {
        throw VpAtInfinity("vanishing point estimate at infinity");
    }
    const double iz = 1.0 / v.z();
    Eigen::Matrix<double, 2, 3> J;
    J << -iz, 0, v.x() * iz * iz, 0, -iz, v.y() * iz * iz;
    return J;
}

VpResidualEval vp_jacobian(const CameraPose& state, const OrthonormalLine& O_world,
                           const Eigen::Vector2d& p_v, const Intrinsics& K) {
    const Chain c = evaluate_chain(state, O_world);
    const Eigen::Vector3d v = K.K() * c.L_camera.d;

    VpResidualEval out;
    out.r = vp_residual(p_v, v);
    // v depends on the camera-frame direction only
    const Eigen::Matrix<double, 2, 3> dr_dd = vp_residual_jacobian(v) * K.K();
    out.J_pose = dr_dd * c.dLc_dpose.bottomRows<3>();
    out.J_line = dr_dd * c.dLc_dline.bottomRows<3>();
    return out;
}

LossEval robust_weight(const RobustLoss& loss, double squared_norm) {
    LossEval e;
    switch (loss.kind) {
        case LossKind::huber: {
            const double d2 = loss.scale * loss.scale;
            if (squared_norm <= d2) {
                e.rho = squared_norm;
                e.drho = 1.0;
            } else {
                const double root = std::sqrt(squared_norm);
                e.rho = 2.0 * loss.scale * root - d2;
                e.drho = loss.scale / root;
            }
            break;
        }
        case LossKind::arctan: {
            const double a2 = loss.scale * loss.scale;
            const double u = squared_norm / a2;
            e.rho = a2 * std::atan(u);
            e.drho = 1.0 / (1.0 + u * u);
            break;
        }
    }
    return e;
}

}  // namespace linemap
