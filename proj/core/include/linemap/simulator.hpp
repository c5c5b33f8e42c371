#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <vector>

#include "linemap/geometry.hpp"

namespace linemap {

struct SceneSpec {
    std::vector<Eigen::Vector3d> structural_directions = {
        Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitZ()};
    int lines_per_direction = 4;
    int unstructured_lines = 2;
    Eigen::Vector3d box_center = Eigen::Vector3d(0.0, 0.0, 3.0);
    Eigen::Vector3d box_half_extents = Eigen::Vector3d(1.5, 1.0, 1.0);
    std::uint64_t rng_seed = 0;
};

struct SceneLine {
    std::int64_t id = -1;
    PluckerLine line;         // world frame, unit scale
    int direction_class = -1; // -1: unstructured
};

enum class TrajectoryKind { orbit, pure_translation, forward_corridor };
enum class LookAtRule { scene_center, fixed_forward };

struct TrajectorySpec {
    TrajectoryKind kind = TrajectoryKind::orbit;
    int frame_count = 8;
    double step_size = 0.15;               // meters along the path
    LookAtRule look_at = LookAtRule::scene_center;
    Eigen::Vector3d target = Eigen::Vector3d(0.0, 0.0, 3.0);
    Eigen::Vector3d start = Eigen::Vector3d::Zero();           // translation kinds
    Eigen::Vector3d translation_direction = Eigen::Vector3d::UnitX();
    double orbit_radius = 3.0;
    RigidTransform extrinsic;  // body <- camera, identity by default
};

struct FrameBundle {
    std::int64_t frame_id = 0;
    CameraPose true_pose;
    std::vector<Segment2D> segments;                      // id = 3D line id (track id)
    std::map<int, Eigen::Vector2d> vp_truth;              // direction class -> plane point
    std::map<std::int64_t, std::int64_t> associations;    // segment id -> line id
    std::map<std::int64_t, bool> degenerate_flags;        // line id -> pair-degenerate vs first view
};

struct RenderOptions {
    double noise_sigma = 0.0;       // normalized-plane units, per endpoint coordinate
    double fov = 1.5707963267948966;  // full field of view, radians
    std::uint64_t seed = 0;
    double min_segment_length = 0.02;
    double outlier_rate = 0.0;      // fraction of extra random segments per frame
    // physical extent of the rendered lines; usually the scene box, inflated
    Eigen::Vector3d clip_box_center = Eigen::Vector3d(0.0, 0.0, 3.0);
    Eigen::Vector3d clip_box_half_extents = Eigen::Vector3d(2.0, 1.4, 1.4);
};

std::vector<SceneLine> make_scene(const SceneSpec& spec);

std::vector<CameraPose> make_trajectory(const TrajectorySpec& spec);

std::vector<FrameBundle> render_observations(const std::vector<SceneLine>& scene,
                                             const std::vector<CameraPose>& poses,
                                             const RenderOptions& opts);

inline std::vector<FrameBundle> render_observations(const std::vector<SceneLine>& scene,
                                                    const std::vector<CameraPose>& poses,
                                                    double noise_sigma, double fov,
                                                    std::uint64_t seed) {
    RenderOptions opts;
    opts.noise_sigma = noise_sigma;
    opts.fov = fov;
    opts.seed = seed;
    return render_observations(scene, poses, opts);
}

// Camera rotation looking from `eye` toward `at` (camera z forward, y down-ish).
Eigen::Matrix3d look_at_rotation(const Eigen::Vector3d& eye, const Eigen::Vector3d& at);

}  // namespace linemap
