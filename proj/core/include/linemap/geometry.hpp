#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>

#include "linemap/errors.hpp"

namespace linemap {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix64d = Eigen::Matrix<double, 6, 4>;

enum class Frame { world, body, camera };

inline constexpr double kKleinTol = 1e-9;        // |n.d| <= tol * |n||d|
inline constexpr double kDegenerateSine = 1e-3;  // plane-normal sine below which triangulation is degenerate

Eigen::Matrix3d skew(const Eigen::Vector3d& v);
Eigen::Matrix3d so3_exp(const Eigen::Vector3d& theta);

// Plucker coordinates (n, d): n is the normal of the plane spanned by the line
// and the frame origin, d the direction. Homogeneous: L and s*L (s > 0) are the
// same line. Valid lines keep |n.d| within kKleinTol of zero and d != 0.
struct PluckerLine {
    Eigen::Vector3d n = Eigen::Vector3d::Zero();
    Eigen::Vector3d d = Eigen::Vector3d::Zero();
    Frame frame = Frame::world;

    static PluckerLine from_nd(const Eigen::Vector3d& n, const Eigen::Vector3d& d,
                               Frame frame = Frame::world);

    double klein_residual() const;  // |n.d| / (|n||d|), 0 for n = 0
    void validate() const;          // throws DegenerateInput on invariant violation

    PluckerLine normalized() const;  // |(n,d)| = 1 representative
    Vector6d stacked() const;

    // Point of the line closest to the frame origin.
    Eigen::Vector3d closest_point_to_origin() const;
};

// Minimal 4-DoF line state: U in SO(3) plus the angle phi encoding
// (w1, w2) = (cos phi, sin phi) = (|n|, |d|) / |(n,d)|.
struct OrthonormalLine {
    Eigen::Matrix3d U = Eigen::Matrix3d::Identity();
    double phi = 0.0;

    static OrthonormalLine from(const Eigen::Matrix3d& U, double phi);

    double w1() const { return std::cos(phi); }
    double w2() const { return std::sin(phi); }
    void validate() const;  // throws DegenerateInput if U is not a rotation
};

// Pose of a child frame expressed in its parent: x_parent = R * x_child + p.
struct RigidTransform {
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d p = Eigen::Vector3d::Zero();

    RigidTransform inverse() const { return {R.transpose(), -(R.transpose() * p)}; }
    RigidTransform compose(const RigidTransform& other) const {
        return {R * other.R, p + R * other.p};
    }
    Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return R * x + p; }
};

// Body pose in the world plus the fixed body<-camera extrinsic.
struct CameraPose {
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();  // world <- body
    Eigen::Vector3d p = Eigen::Vector3d::Zero();      // body origin in world
    RigidTransform extrinsic;                         // body <- camera

    RigidTransform body_in_world() const { return {R, p}; }
    RigidTransform camera_in_world() const { return RigidTransform{R, p}.compose(extrinsic); }
    void validate() const;
};

// Two observed segment endpoints on the normalized image plane.
struct Segment2D {
    Eigen::Vector2d p_s = Eigen::Vector2d::Zero();
    Eigen::Vector2d p_e = Eigen::Vector2d::Zero();
    std::int64_t id = -1;

    Eigen::Vector2d midpoint() const { return 0.5 * (p_s + p_e); }
    double length() const { return (p_e - p_s).norm(); }
    Eigen::Vector3d homogeneous_start() const { return {p_s.x(), p_s.y(), 1.0}; }
    Eigen::Vector3d homogeneous_end() const { return {p_e.x(), p_e.y(), 1.0}; }
    // Homogeneous image-line coefficients through the two endpoints.
    Eigen::Vector3d homogeneous_line() const;
};

struct LineMetrics {
    double direction_error = 0.0;            // radians, folded to [0, pi/2]
    double orthogonal_distance_error = 0.0;  // meters, between the infinite lines
};

PluckerLine plucker_from_points(const Eigen::Vector3d& P1, const Eigen::Vector3d& P2,
                                Frame frame = Frame::world);

OrthonormalLine to_orthonormal(const PluckerLine& L);
PluckerLine to_plucker(const OrthonormalLine& O, Frame frame = Frame::world);

// d(to_plucker)/d(delta) at delta = 0, rows (n, d), columns (dpsi1..3, dphi).
Matrix64d orthonormal_jacobian(const OrthonormalLine& O);

OrthonormalLine orthonormal_update(const OrthonormalLine& O, const Eigen::Vector4d& delta);

// Line expressed in a child frame given the child's pose in the line's frame.
PluckerLine transform_into(const PluckerLine& L, const RigidTransform& child_in_parent,
                           Frame child_frame);

// 6x6 Plucker motion matrix mapping (dn, dd) in the parent frame to the child frame.
Matrix6d plucker_transform_matrix(const RigidTransform& child_in_parent);

// World-frame line into the camera frame of `pose` (body then extrinsic).
PluckerLine transform_line(const PluckerLine& L_world, const CameraPose& pose);

struct TriangulationAttempt {
    PluckerLine line;        // world frame, unit scale; provisional when degenerate
    double plane_sine = 0;   // |m1 x m2| / (|m1||m2|)
    bool degenerate = false;
};

// Two-view triangulation from back-projection planes. Never throws for distinct
// generic inputs; `degenerate` flags plane_sine < kDegenerateSine (the caller
// may keep the provisional line or reject it).
TriangulationAttempt try_triangulate_line(const Segment2D& obs1, const CameraPose& pose1,
                                          const Segment2D& obs2, const CameraPose& pose2);

// Throwing variant: DegenerateTriangulation when the attempt is degenerate.
PluckerLine triangulate_line(const Segment2D& obs1, const CameraPose& pose1,
                             const Segment2D& obs2, const CameraPose& pose2);

LineMetrics line_error(const PluckerLine& est, const PluckerLine& gt);

}  // namespace linemap
