#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "linemap/geometry.hpp"

namespace linemap {

// One detected vanishing point with the segment ids that voted for it.
// For is_finite == false, p_v holds the unit direction of the point at
// infinity instead of a plane position.
struct VanishingPointObservation {
    Eigen::Vector2d p_v = Eigen::Vector2d::Zero();
    std::vector<std::int64_t> member_ids;
    bool is_finite = true;
    Eigen::Vector3d v = Eigen::Vector3d::Zero();  // homogeneous, unit norm
};

struct JLinkageParams {
    int num_hypotheses = 500;
    double consensus_threshold = 0.0175;  // radians, ~1 deg
    int min_cluster_size = 3;
    std::uint64_t rng_seed = 0;
};

// Intersection of the homogeneous lines through two segments.
Eigen::Vector3d vp_hypothesis(const Segment2D& s1, const Segment2D& s2);

// Angle between the segment direction and the direction from the segment
// midpoint toward v, folded to [0, pi/2]. Works for finite and infinite v.
double consistency(const Segment2D& s, const Eigen::Vector3d& v);

// argmin over |v| = 1 of sum (l_i^T v)^2 for the members' homogeneous lines.
Eigen::Vector3d fit_vp(const std::vector<Segment2D>& members);

struct ClusterResult {
    std::vector<VanishingPointObservation> clusters;
    std::vector<std::int64_t> outlier_ids;
};

ClusterResult jlinkage_cluster(const std::vector<Segment2D>& segments,
                               const JLinkageParams& params);

}  // namespace linemap
