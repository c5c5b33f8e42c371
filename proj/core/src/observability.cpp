#include "linemap/observability.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace linemap {

Eigen::Matrix<double, 2, 4> line_jacobian_do(const OrthonormalLine& O_camera,
                                             const Segment2D& obs, const Intrinsics& K) {
    const PluckerLine L_c = to_plucker(O_camera, Frame::camera);
    const Eigen::Vector3d l = project_line(L_c, K);
    const Eigen::Matrix<double, 2, 3> dr_dl = line_residual_jacobian(l, obs.p_s, obs.p_e);
    const Matrix64d dL_do = orthonormal_jacobian(O_camera);
    return dr_dl * K.K_line() * dL_do.topRows<3>();
}

Eigen::Matrix<double, 2, 4> vp_jacobian_do(const OrthonormalLine& O_camera, const Intrinsics& K) {
    const PluckerLine L_c = to_plucker(O_camera, Frame::camera);
    const Eigen::Vector3d v = K.K() * L_c.d;
    const Eigen::Matrix<double, 2, 3> dr_dv = vp_residual_jacobian(v);
    const Matrix64d dL_do = orthonormal_jacobian(O_camera);
    return dr_dv * K.K() * dL_do.bottomRows<3>();
}

Eigen::Matrix4d line_fim(const Eigen::Matrix<double, 2, 4>& J, const Eigen::Matrix2d& Omega) {
    return J.transpose() * Omega * J;
}

namespace {

Eigen::Vector4d descending_singular_values(const Eigen::Matrix4d& H) {
    return Eigen::JacobiSVD<Eigen::Matrix4d>(H).singularValues();
}

}  // namespace

FimReport stacked_fim(const Eigen::Matrix<double, 2, 4>& J_line,
                      const Eigen::Matrix<double, 2, 4>& J_vp, const Eigen::Matrix2d& Omega_l,
                      const Eigen::Matrix2d& Omega_v) {
    FimReport rep;
    rep.H_line = line_fim(J_line, Omega_l);
    rep.H_vp = line_fim(J_vp, Omega_v);
    rep.H_total = rep.H_line + rep.H_vp;
    rep.rank_line = numeric_rank(rep.H_line);
    rep.rank_vp = numeric_rank(rep.H_vp);
    rep.rank_total = numeric_rank(rep.H_total);
    rep.singular_values = {descending_singular_values(rep.H_line),
                           descending_singular_values(rep.H_vp),
                           descending_singular_values(rep.H_total)};
    return rep;
}

int numeric_rank(const Eigen::MatrixXd& M, double tol_ratio) {
    if (M.size() == 0) return 0;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[0] == 0.0) return 0;
    const double tol = tol_ratio * sv[0];
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] > tol) ++rank;
    }
    return rank;
}

bool is_slope_degenerate(const Eigen::Vector3d& l, const Eigen::Vector2d& p_s,
                         const Eigen::Vector2d& p_e, double tol) {
    const double l_d = std::hypot(l.x(), l.y());
    const double du = p_s.x() - p_e.x();
    const double dv = p_s.y() - p_e.y();
    const double seg_len = std::hypot(du, dv);
    return std::abs(l.y() * du - l.x() * dv) <= tol * l_d * seg_len;
}

FimReport analyze_line(const LineFrameObservation& obs, const Eigen::Matrix2d& Omega_l,
                       const Eigen::Matrix2d& Omega_v, double slope_tol) {
    const Eigen::Matrix<double, 2, 4> J_l = line_jacobian_do(obs.line_in_camera, obs.segment, obs.K);
    Eigen::Matrix<double, 2, 4> J_v = Eigen::Matrix<double, 2, 4>::Zero();
    if (obs.vp.has_value()) {
        J_v = vp_jacobian_do(obs.line_in_camera, obs.K);
    }
    FimReport rep = stacked_fim(J_l, J_v, Omega_l, Omega_v);
    const Eigen::Vector3d l = project_line(to_plucker(obs.line_in_camera, Frame::camera), obs.K);
    rep.slope_degenerate = is_slope_degenerate(l, obs.segment.p_s, obs.segment.p_e, slope_tol);
    return rep;
}

}  // namespace linemap
