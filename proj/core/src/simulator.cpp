#include "linemap/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

namespace linemap {

namespace {

Eigen::Vector3d uniform_in_box(std::mt19937_64& rng, const Eigen::Vector3d& center,
                               const Eigen::Vector3d& half) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    // evaluation order of function arguments is unspecified; draw explicitly
    const double x = u(rng), y = u(rng), z = u(rng);
    return center + Eigen::Vector3d(x * half.x(), y * half.y(), z * half.z());
}

Eigen::Vector3d uniform_unit_vector(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Vector3d v;
    do {
        const double a = n(rng), b = n(rng), c = n(rng);
        v = Eigen::Vector3d(a, b, c);
    } while (v.norm() < 1e-6);
    return v.normalized();
}

// Intersection of the parametric line P + t*d with the axis-aligned box,
// as a t-interval; empty when the line misses the box.
std::optional<std::pair<double, double>> clip_to_box(const Eigen::Vector3d& P,
                                                     const Eigen::Vector3d& d,
                                                     const Eigen::Vector3d& center,
                                                     const Eigen::Vector3d& half) {
    double t0 = -1e18, t1 = 1e18;
    for (int k = 0; k < 3; ++k) {
        const double lo = center[k] - half[k], hi = center[k] + half[k];
        if (std::abs(d[k]) < 1e-15) {
            if (P[k] < lo || P[k] > hi) return std::nullopt;
            continue;
        }
        double a = (lo - P[k]) / d[k];
        double b = (hi - P[k]) / d[k];
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
    }
    if (t0 >= t1) return std::nullopt;
    return std::make_pair(t0, t1);
}

// Liang-Barsky clip of a 2D segment to the square [-m, m]^2.
std::optional<std::pair<Eigen::Vector2d, Eigen::Vector2d>> clip_to_square(
    const Eigen::Vector2d& a, const Eigen::Vector2d& b, double m) {
    const Eigen::Vector2d d = b - a;
    double t0 = 0.0, t1 = 1.0;
    const double p[4] = {-d.x(), d.x(), -d.y(), d.y()};
    const double q[4] = {a.x() + m, m - a.x(), a.y() + m, m - a.y()};
    for (int k = 0; k < 4; ++k) {
        if (std::abs(p[k]) < 1e-15) {
            if (q[k] < 0) return std::nullopt;
            continue;
        }
        const double r = q[k] / p[k];
        if (p[k] < 0) {
            t0 = std::max(t0, r);
        } else {
            t1 = std::min(t1, r);
        }
    }
    if (t0 >= t1) return std::nullopt;
    return std::make_pair(a + t0 * d, a + t1 * d);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 step
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Eigen::Vector3d scene_direction(const std::vector<SceneLine>& scene, int direction_class) {
    for (const SceneLine& sl : scene) {
        if (sl.direction_class == direction_class) return sl.line.d.normalized();
    }
    return Eigen::Vector3d::UnitZ();
}

// Noise-free image segment of a scene line in a camera, or nullopt when the
// visible part is shorter than min_length.
std::optional<Segment2D> project_scene_line(const SceneLine& sl, const CameraPose& pose,
                                            const RenderOptions& opts) {
    const double fov = opts.fov;
    const double min_length = opts.min_segment_length;
    const RigidTransform cam = pose.camera_in_world();
    const Eigen::Vector3d P = sl.line.closest_point_to_origin();
    const Eigen::Vector3d dir = sl.line.d.normalized();

    // carve out the piece inside the scene (lines are infinite)
    const auto box = clip_to_box(P, dir, opts.clip_box_center, opts.clip_box_half_extents);
    if (!box) return std::nullopt;
    Eigen::Vector3d X0 = P + box->first * dir;
    Eigen::Vector3d X1 = P + box->second * dir;

    // camera frame; clip to z >= near
    Eigen::Vector3d C0 = cam.R.transpose() * (X0 - cam.p);
    Eigen::Vector3d C1 = cam.R.transpose() * (X1 - cam.p);
    const double near = 0.05;
    if (C0.z() < near && C1.z() < near) return std::nullopt;
    if (C0.z() < near || C1.z() < near) {
        const double t = (near - C0.z()) / (C1.z() - C0.z());
        const Eigen::Vector3d Xc = C0 + t * (C1 - C0);
        if (C0.z() < near) {
            C0 = Xc;
        } else {
            C1 = Xc;
        }
    }

    const Eigen::Vector2d a(C0.x() / C0.z(), C0.y() / C0.z());
    const Eigen::Vector2d b(C1.x() / C1.z(), C1.y() / C1.z());
    const double half_extent = std::tan(fov / 2.0);
    const auto clipped = clip_to_square(a, b, half_extent);
    if (!clipped) return std::nullopt;
    if ((clipped->second - clipped->first).norm() < min_length) return std::nullopt;

    Segment2D seg;
    seg.p_s = clipped->first;
    seg.p_e = clipped->second;
    seg.id = sl.id;
    return seg;
}

}  // namespace

std::vector<SceneLine> make_scene(const SceneSpec& spec) {
    std::mt19937_64 rng(spec.rng_seed);
    std::vector<SceneLine> scene;
    std::int64_t next_id = 0;
    for (size_t c = 0; c < spec.structural_directions.size(); ++c) {
        const Eigen::Vector3d dir = spec.structural_directions[c].normalized();
        for (int k = 0; k < spec.lines_per_direction; ++k) {
            const Eigen::Vector3d P = uniform_in_box(rng, spec.box_center, spec.box_half_extents);
            SceneLine sl;
            sl.id = next_id++;
            sl.line = plucker_from_points(P, P + dir).normalized();
            sl.direction_class = static_cast<int>(c);
            scene.push_back(sl);
        }
    }
    for (int k = 0; k < spec.unstructured_lines; ++k) {
        const Eigen::Vector3d P = uniform_in_box(rng, spec.box_center, spec.box_half_extents);
        const Eigen::Vector3d dir = uniform_unit_vector(rng);
        SceneLine sl;
        sl.id = next_id++;
        sl.line = plucker_from_points(P, P + dir).normalized();
        sl.direction_class = -1;
        scene.push_back(sl);
    }
    return scene;
}

Eigen::Matrix3d look_at_rotation(const Eigen::Vector3d& eye, const Eigen::Vector3d& at) {
    const Eigen::Vector3d z = (at - eye).normalized();
    Eigen::Vector3d up(0.0, 1.0, 0.0);
    if (std::abs(up.dot(z)) > 0.99) up = Eigen::Vector3d(1.0, 0.0, 0.0);
    const Eigen::Vector3d x = up.cross(z).normalized();
    const Eigen::Vector3d y = z.cross(x);
    Eigen::Matrix3d R;
    R.col(0) = x;
    R.col(1) = y;
    R.col(2) = z;
    return R;
}

std::vector<CameraPose> make_trajectory(const TrajectorySpec& spec) {
    if (spec.frame_count < 2) {
        throw PreconditionError("trajectory needs at least two frames");
    }
    std::vector<CameraPose> poses;
    poses.reserve(spec.frame_count);

    switch (spec.kind) {
        case TrajectoryKind::orbit: {
            const double dtheta = spec.step_size / spec.orbit_radius;
            // circle in a generic tilted plane: its normal has no zero
            // component, so no chord between two frames can be parallel to a
            // coordinate axis and axis-aligned scene lines never end up
            // coplanar with a triangulation baseline by construction
            const Eigen::Vector3d normal = Eigen::Vector3d(0.3, 0.75, 0.6).normalized();
            const Eigen::Vector3d u = normal.cross(Eigen::Vector3d::UnitZ()).normalized();
            const Eigen::Vector3d w = u.cross(normal);
            for (int i = 0; i < spec.frame_count; ++i) {
                const double th = dtheta * (i - (spec.frame_count - 1) / 2.0);
                const Eigen::Vector3d p =
                    spec.target + spec.orbit_radius * (std::sin(th) * u - std::cos(th) * w);
                CameraPose pose;
                pose.p = p;
                pose.R = look_at_rotation(p, spec.target);
                pose.extrinsic = spec.extrinsic;
                poses.push_back(pose);
            }
            break;
        }
        case TrajectoryKind::pure_translation: {
            const Eigen::Vector3d dir = spec.translation_direction.normalized();
            const Eigen::Vector3d mid =
                spec.start + dir * spec.step_size * (spec.frame_count - 1) / 2.0;
            const Eigen::Matrix3d R = spec.look_at == LookAtRule::scene_center
                                          ? look_at_rotation(mid, spec.target)
                                          : look_at_rotation(Eigen::Vector3d::Zero(), dir);
            for (int i = 0; i < spec.frame_count; ++i) {
                CameraPose pose;
                pose.p = spec.start + i * spec.step_size * dir;
                pose.R = R;
                pose.extrinsic = spec.extrinsic;
                poses.push_back(pose);
            }
            break;
        }
        case TrajectoryKind::forward_corridor: {
            const Eigen::Vector3d dir = spec.translation_direction.normalized();
            const Eigen::Matrix3d R = look_at_rotation(Eigen::Vector3d::Zero(), dir);
            for (int i = 0; i < spec.frame_count; ++i) {
                CameraPose pose;
                pose.p = spec.start + i * spec.step_size * dir;
                pose.R = R;
                pose.extrinsic = spec.extrinsic;
                poses.push_back(pose);
            }
            break;
        }
    }
    return poses;
}

std::vector<FrameBundle> render_observations(const std::vector<SceneLine>& scene,
                                             const std::vector<CameraPose>& poses,
                                             const RenderOptions& opts) {
    std::vector<FrameBundle> bundles;
    bundles.reserve(poses.size());

    // first frame each line was seen in, with its noise-free segment (for the
    // pairwise degeneracy labels)
    std::map<std::int64_t, std::pair<std::int64_t, Segment2D>> first_view;

    for (size_t i = 0; i < poses.size(); ++i) {
        FrameBundle bundle;
        bundle.frame_id = static_cast<std::int64_t>(i);
        bundle.true_pose = poses[i];
        std::mt19937_64 rng(mix_seed(opts.seed, i));
        std::normal_distribution<double> gauss(0.0, 1.0);

        std::vector<int> visible_classes;
        for (const SceneLine& sl : scene) {
            const auto clean = project_scene_line(sl, poses[i], opts);
            if (!clean) continue;

            Segment2D seg = *clean;
            if (opts.noise_sigma > 0) {
                seg.p_s.x() += opts.noise_sigma * gauss(rng);
                seg.p_s.y() += opts.noise_sigma * gauss(rng);
                seg.p_e.x() += opts.noise_sigma * gauss(rng);
                seg.p_e.y() += opts.noise_sigma * gauss(rng);
            }
            bundle.segments.push_back(seg);
            bundle.associations[seg.id] = sl.id;
            if (sl.direction_class >= 0) visible_classes.push_back(sl.direction_class);

            // degeneracy label against the first observing view, on true data
            auto it = first_view.find(sl.id);
            if (it == first_view.end()) {
                first_view.emplace(sl.id, std::make_pair(bundle.frame_id, *clean));
                bundle.degenerate_flags[sl.id] = true;  // no baseline yet
            } else {
                const auto att = try_triangulate_line(it->second.second, poses[it->second.first],
                                                      *clean, poses[i]);
                bundle.degenerate_flags[sl.id] = att.degenerate;
            }
        }

        // ground-truth vanishing point per visible structural direction
        std::sort(visible_classes.begin(), visible_classes.end());
        visible_classes.erase(std::unique(visible_classes.begin(), visible_classes.end()),
                              visible_classes.end());
        const RigidTransform cam = poses[i].camera_in_world();
        for (int c : visible_classes) {
            const Eigen::Vector3d d_c =
                cam.R.transpose() * scene_direction(scene, c);
            // emit only vanishing points a detector could localize: within a
            // finite radius of the image center, not just |v3| > 0
            if (std::abs(d_c.z()) * 50.0 <= d_c.head<2>().norm()) continue;
            bundle.vp_truth[c] = Eigen::Vector2d(d_c.x() / d_c.z(), d_c.y() / d_c.z());
        }

        if (opts.outlier_rate > 0 && !bundle.segments.empty()) {
            const int n_out =
                static_cast<int>(std::floor(opts.outlier_rate * bundle.segments.size()));
            std::uniform_real_distribution<double> u(-0.8, 0.8);
            for (int k = 0; k < n_out; ++k) {
                Segment2D seg;
                const double cx = u(rng), cy = u(rng);
                const double ang = u(rng) * 3.9269908;  // random orientation
                const Eigen::Vector2d dir(std::cos(ang), std::sin(ang));
                seg.p_s = Eigen::Vector2d(cx, cy) - 0.15 * dir;
                seg.p_e = Eigen::Vector2d(cx, cy) + 0.15 * dir;
                seg.id = 1000000 + static_cast<std::int64_t>(i) * 1000 + k;
                bundle.segments.push_back(seg);
                bundle.associations[seg.id] = -1;
            }
        }

        bundles.push_back(std::move(bundle));
    }
    return bundles;
}

}  // namespace linemap
