#include "linemap/geometry.hpp"

#include <cmath>

namespace linemap {

namespace {
constexpr double kSo3Tol = 1e-12;
constexpr double kZeroTol = 1e-12;
}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d S;
    S << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return S;
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& theta) {
    const double angle = theta.norm();
    if (angle < 1e-10) {
        // second-order expansion keeps the result in SO(3) to round-off
        const Eigen::Matrix3d S = skew(theta);
        return Eigen::Matrix3d::Identity() + S + 0.5 * S * S;
    }
    return Eigen::AngleAxisd(angle, theta / angle).toRotationMatrix();
}

PluckerLine PluckerLine::from_nd(const Eigen::Vector3d& n, const Eigen::Vector3d& d, Frame frame) {
    PluckerLine L{n, d, frame};
    L.validate();
    return L;
}

double PluckerLine::klein_residual() const {
    const double nn = n.norm(), dd = d.norm();
    if (nn == 0.0 || dd == 0.0) return 0.0;
    return std::abs(n.dot(d)) / (nn * dd);
}

void PluckerLine::validate() const {
    if (!(d.norm() > kZeroTol)) {
        throw DegenerateInput("Plucker line has no direction");
    }
    if (klein_residual() > kKleinTol) {
        throw DegenerateInput("Plucker line violates the Klein constraint");
    }
}

PluckerLine PluckerLine::normalized() const {
    const double s = stacked().norm();
    return {n / s, d / s, frame};
}

Vector6d PluckerLine::stacked() const {
    Vector6d v;
    v << n, d;
    return v;
}

Eigen::Vector3d PluckerLine::closest_point_to_origin() const {
    return d.cross(n) / d.squaredNorm();
}

OrthonormalLine OrthonormalLine::from(const Eigen::Matrix3d& U, double phi) {
    OrthonormalLine O{U, phi};
    O.validate();
    return O;
}

void OrthonormalLine::validate() const {
    if ((U.transpose() * U - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > kSo3Tol ||
        std::abs(U.determinant() - 1.0) > kSo3Tol) {
        throw DegenerateInput("orthonormal line frame is not a rotation");
    }
}

void CameraPose::validate() const {
    const auto off = [](const Eigen::Matrix3d& M) {
        return (M.transpose() * M - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    };
    if (off(R) > kSo3Tol || std::abs(R.determinant() - 1.0) > kSo3Tol) {
        throw DegenerateInput("pose rotation is not in SO(3)");
    }
    if (off(extrinsic.R) > kSo3Tol || std::abs(extrinsic.R.determinant() - 1.0) > kSo3Tol) {
        throw DegenerateInput("extrinsic rotation is not in SO(3)");
    }
}

Eigen::Vector3d Segment2D::homogeneous_line() const {
    return homogeneous_start().cross(homogeneous_end());
}

PluckerLine plucker_from_points(const Eigen::Vector3d& P1, const Eigen::Vector3d& P2, Frame frame) {
    const Eigen::Vector3d d = P2 - P1;
    if (!(d.norm() > kZeroTol)) {
        throw DegenerateInput("coincident points define no line");
    }
    return {P1.cross(P2), d, frame};
}

OrthonormalLine to_orthonormal(const PluckerLine& L) {
    const double nn = L.n.norm(), dd = L.d.norm();
    if (nn <= kZeroTol) {
        throw DegenerateInput("line through the origin has no orthonormal representation");
    }
    if (dd <= kZeroTol) {
        throw DegenerateInput("line without direction has no orthonormal representation");
    }
    // u2 is rebuilt from u3 x u1 so U is orthonormal to round-off even when the
    // input carries the allowed Klein residual.
    const Eigen::Vector3d u1 = L.n / nn;
    Eigen::Vector3d u3 = L.n.cross(L.d);
    u3 /= u3.norm();
    const Eigen::Vector3d u2 = u3.cross(u1);
    Eigen::Matrix3d U;
    U.col(0) = u1;
    U.col(1) = u2;
    U.col(2) = u3;
    return {U, std::atan2(dd, nn)};
}

PluckerLine to_plucker(const OrthonormalLine& O, Frame frame) {
    const double w1 = O.w1(), w2 = O.w2();
    if (std::abs(w2) <= kZeroTol) {
        throw LineAtInfinity("w2 = 0 maps to a line at infinity");
    }
    return {w1 * O.U.col(0), w2 * O.U.col(1), frame};
}

Matrix64d orthonormal_jacobian(const OrthonormalLine& O) {
    const double w1 = O.w1(), w2 = O.w2();
    const Eigen::Vector3d u1 = O.U.col(0), u2 = O.U.col(1), u3 = O.U.col(2);
    Matrix64d J = Matrix64d::Zero();
    J.block<3, 1>(3, 0) = w2 * u3;
    J.block<3, 1>(0, 1) = -w1 * u3;
    J.block<3, 1>(0, 2) = w1 * u2;
    J.block<3, 1>(3, 2) = -w2 * u1;
    J.block<3, 1>(0, 3) = -w2 * u1;
    J.block<3, 1>(3, 3) = w1 * u2;
    return J;
}

OrthonormalLine orthonormal_update(const OrthonormalLine& O, const Eigen::Vector4d& delta) {
    return {O.U * so3_exp(delta.head<3>()), O.phi + delta[3]};
}

PluckerLine transform_into(const PluckerLine& L, const RigidTransform& child_in_parent,
                           Frame child_frame) {
    const Eigen::Matrix3d Rt = child_in_parent.R.transpose();
    return {Rt * (L.n + L.d.cross(child_in_parent.p)), Rt * L.d, child_frame};
}

Matrix6d plucker_transform_matrix(const RigidTransform& child_in_parent) {
    const Eigen::Matrix3d Rt = child_in_parent.R.transpose();
    Matrix6d T = Matrix6d::Zero();
    T.block<3, 3>(0, 0) = Rt;
    T.block<3, 3>(0, 3) = -Rt * skew(child_in_parent.p);
    T.block<3, 3>(3, 3) = Rt;
    return T;
}

PluckerLine transform_line(const PluckerLine& L_world, const CameraPose& pose) {
    if (L_world.frame != Frame::world) {
        throw PreconditionError("transform_line expects a world-frame line");
    }
    const PluckerLine L_body = transform_into(L_world, pose.body_in_world(), Frame::body);
    return transform_into(L_body, pose.extrinsic, Frame::camera);
}

namespace {

// Back-projection plane of an observed segment: unit normal in world
// coordinates plus offset b so the plane is {x : m.x = b}.
struct BackProjectionPlane {
    Eigen::Vector3d m;
    double b;
    Eigen::Vector3d center;
};

BackProjectionPlane back_projection_plane(const Segment2D& obs, const CameraPose& pose) {
    const RigidTransform cam = pose.camera_in_world();
    Eigen::Vector3d m = cam.R * obs.homogeneous_line();
    m /= m.norm();
    return {m, m.dot(cam.p), cam.p};
}

}  // namespace

TriangulationAttempt try_triangulate_line(const Segment2D& obs1, const CameraPose& pose1,
                                          const Segment2D& obs2, const CameraPose& pose2) {
    const BackProjectionPlane pl1 = back_projection_plane(obs1, pose1);
    const BackProjectionPlane pl2 = back_projection_plane(obs2, pose2);

    TriangulationAttempt out;
    const Eigen::Vector3d cross = pl1.m.cross(pl2.m);
    out.plane_sine = cross.norm();
    const double baseline = (pl2.center - pl1.center).norm();
    out.degenerate = out.plane_sine < kDegenerateSine || baseline < kZeroTol;

    if (out.plane_sine > 1e-15) {
        const Eigen::Vector3d d = cross / cross.norm();
        // closest point of the plane-plane intersection to the world origin
        const double dot = pl1.m.dot(pl2.m);
        const double denom = 1.0 - dot * dot;
        const double a = (pl1.b - pl2.b * dot) / denom;
        const double c = (pl2.b - pl1.b * dot) / denom;
        const Eigen::Vector3d x0 = a * pl1.m + c * pl2.m;
        out.line = PluckerLine{x0.cross(d), d, Frame::world}.normalized();
    } else {
        // planes coincide to round-off: provisional line inside the common
        // plane, through the first view's midpoint ray at a nominal 3 m range
        const RigidTransform cam = pose1.camera_in_world();
        const Eigen::Vector3d ps = pl1.center + 3.0 * (cam.R * obs1.homogeneous_start()).normalized();
        const Eigen::Vector3d pe = pl1.center + 3.0 * (cam.R * obs1.homogeneous_end()).normalized();
        out.line = plucker_from_points(ps, pe).normalized();
    }
    return out;
}

PluckerLine triangulate_line(const Segment2D& obs1, const CameraPose& pose1,
                             const Segment2D& obs2, const CameraPose& pose2) {
    const TriangulationAttempt att = try_triangulate_line(obs1, pose1, obs2, pose2);
    if (att.degenerate) {
        throw DegenerateTriangulation("back-projection planes are near-parallel");
    }
    return att.line;
}

LineMetrics line_error(const PluckerLine& est, const PluckerLine& gt) {
    const Eigen::Vector3d de = est.d.normalized();
    const Eigen::Vector3d dg = gt.d.normalized();
    LineMetrics m;
    m.direction_error = std::atan2(de.cross(dg).norm(), std::abs(de.dot(dg)));

    const Eigen::Vector3d x1 = est.closest_point_to_origin();
    const Eigen::Vector3d x2 = gt.closest_point_to_origin();
    const Eigen::Vector3d cross = de.cross(dg);
    if (cross.norm() < 1e-9) {
        const Eigen::Vector3d delta = x2 - x1;
        m.orthogonal_distance_error = (delta - delta.dot(de) * de).norm();
    } else {
        m.orthogonal_distance_error = std::abs((x2 - x1).dot(cross)) / cross.norm();
    }
    return m;
}

}  // namespace linemap
