#include "linemap/vp_detect.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>

namespace linemap {

Eigen::Vector3d vp_hypothesis(const Segment2D& s1, const Segment2D& s2) {
    const Eigen::Vector3d l1 = s1.homogeneous_line().normalized();
    const Eigen::Vector3d l2 = s2.homogeneous_line().normalized();
    const Eigen::Vector3d v = l1.cross(l2);
    if (v.norm() < 1e-12) {
        throw DegenerateHypothesis("collinear segments span no vanishing point");
    }
    return v.normalized();
}

double consistency(const Segment2D& s, const Eigen::Vector3d& v) {
    const Eigen::Vector2d g = s.p_e - s.p_s;
    const Eigen::Vector2d mid = s.midpoint();
    // h is proportional to (point(v) - mid) for finite v and to the direction
    // of v for v at infinity; the fold makes the v3 sign irrelevant.
    const Eigen::Vector2d h(v.x() - mid.x() * v.z(), v.y() - mid.y() * v.z());
    const double gn = g.norm(), hn = h.norm();
    if (hn < 1e-15 || gn < 1e-15) return 0.0;
    const double cross = g.x() * h.y() - g.y() * h.x();
    const double dot = g.dot(h);
    return std::atan2(std::abs(cross), std::abs(dot));
}

Eigen::Vector3d fit_vp(const std::vector<Segment2D>& members) {
    if (members.size() < 2) {
        throw PreconditionError("fit_vp needs at least two segments");
    }
    Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
    for (const Segment2D& s : members) {
        const Eigen::Vector3d l = s.homogeneous_line().normalized();
        M += l * l.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(M);
    const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
    if (evals[1] - evals[0] < 1e-12) {
        throw IllConditioned("vanishing point direction is ambiguous");
    }
    Eigen::Vector3d v = eig.eigenvectors().col(0);
    // canonical sign for reproducibility
    int imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0) v = -v;
    return v;
}

namespace {

// preference sets as packed bit blocks
struct PrefSet {
    std::vector<std::uint64_t> bits;

    explicit PrefSet(int n_hypotheses) : bits((n_hypotheses + 63) / 64, 0) {}
    void set(int h) { bits[h / 64] |= std::uint64_t{1} << (h % 64); }

    static double jaccard_distance(const PrefSet& a, const PrefSet& b) {
        std::uint64_t inter = 0, uni = 0;
        for (size_t i = 0; i < a.bits.size(); ++i) {
            inter += std::popcount(a.bits[i] & b.bits[i]);
            uni += std::popcount(a.bits[i] | b.bits[i]);
        }
        if (uni == 0) return 1.0;
        return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
    }

    PrefSet intersect(const PrefSet& other) const {
        PrefSet out = *this;
        for (size_t i = 0; i < bits.size(); ++i) out.bits[i] &= other.bits[i];
        return out;
    }
};

struct Cluster {
    std::vector<int> members;  // indices into the segment list, sorted
    PrefSet prefs;
};

// a vanishing point is usable as a plane position only within a finite
// radius; beyond that the cluster keeps its direction and is_finite = false
constexpr double kMaxFiniteVpRadius = 50.0;

bool is_finite_vp(const Eigen::Vector3d& v) {
    return std::abs(v.z()) * kMaxFiniteVpRadius > v.head<2>().norm();
}

VanishingPointObservation make_observation(const Eigen::Vector3d& v,
                                           std::vector<std::int64_t> member_ids) {
    VanishingPointObservation obs;
    obs.v = v;
    obs.member_ids = std::move(member_ids);
    obs.is_finite = is_finite_vp(v);
    if (obs.is_finite) {
        obs.p_v = Eigen::Vector2d(v.x() / v.z(), v.y() / v.z());
    } else {
        obs.p_v = Eigen::Vector2d(v.x(), v.y()).normalized();
    }
    return obs;
}

}  // namespace

ClusterResult jlinkage_cluster(const std::vector<Segment2D>& segments,
                               const JLinkageParams& params) {
    if (segments.size() < 2) {
        throw PreconditionError("jlinkage_cluster needs at least two segments");
    }
    const int n = static_cast<int>(segments.size());

    std::mt19937_64 rng(params.rng_seed);
    std::uniform_int_distribution<int> pick(0, n - 1);

    std::vector<Eigen::Vector3d> hypotheses;
    hypotheses.reserve(params.num_hypotheses);
    int attempts = 0;
    const int max_attempts = 50 * params.num_hypotheses + 100;
    while (static_cast<int>(hypotheses.size()) < params.num_hypotheses &&
           attempts++ < max_attempts) {
        const int i = pick(rng);
        const int j = pick(rng);
        if (i == j) continue;
        try {
            hypotheses.push_back(vp_hypothesis(segments[i], segments[j]));
        } catch (const DegenerateHypothesis&) {
        }
    }
    const int n_hyp = static_cast<int>(hypotheses.size());

    std::vector<Cluster> clusters;
    clusters.reserve(n);
    for (int i = 0; i < n; ++i) {
        Cluster c{std::vector<int>{i}, PrefSet(n_hyp)};
        for (int h = 0; h < n_hyp; ++h) {
            if (consistency(segments[i], hypotheses[h]) < params.consensus_threshold) {
                c.prefs.set(h);
            }
        }
        clusters.push_back(std::move(c));
    }

    // agglomerate while any pair of preference sets overlaps
    while (clusters.size() > 1) {
        double best = 1.0;
        int bi = -1, bj = -1;
        for (size_t i = 0; i + 1 < clusters.size(); ++i) {
            for (size_t j = i + 1; j < clusters.size(); ++j) {
                const double d = PrefSet::jaccard_distance(clusters[i].prefs, clusters[j].prefs);
                if (d < best) {
                    best = d;
                    bi = static_cast<int>(i);
                    bj = static_cast<int>(j);
                }
            }
        }
        if (bi < 0) break;  // all pairwise distances are 1
        Cluster merged{clusters[bi].members, clusters[bi].prefs.intersect(clusters[bj].prefs)};
        merged.members.insert(merged.members.end(), clusters[bj].members.begin(),
                              clusters[bj].members.end());
        std::sort(merged.members.begin(), merged.members.end());
        clusters.erase(clusters.begin() + bj);
        clusters[bi] = std::move(merged);
    }

    ClusterResult result;
    std::set<std::int64_t> outliers;
    for (const Segment2D& s : segments) outliers.insert(s.id);

    std::vector<std::pair<int, VanishingPointObservation>> kept;  // (smallest member, obs)
    for (Cluster& c : clusters) {
        // enforce that every reported member is consistent with the fitted
        // vanishing point; refit after dropping stragglers
        std::vector<int> members = c.members;
        Eigen::Vector3d v;
        bool ok = false;
        for (int round = 0; round < 10; ++round) {
            if (static_cast<int>(members.size()) < params.min_cluster_size) break;
            std::vector<Segment2D> segs;
            segs.reserve(members.size());
            for (int idx : members) segs.push_back(segments[idx]);
            try {
                v = fit_vp(segs);
            } catch (const IllConditioned&) {
                break;
            }
            std::vector<int> keep;
            for (int idx : members) {
                if (consistency(segments[idx], v) < params.consensus_threshold) {
                    keep.push_back(idx);
                }
            }
            if (keep.size() == members.size()) {
                ok = true;
                break;
            }
            members = std::move(keep);
        }
        if (!ok || static_cast<int>(members.size()) < params.min_cluster_size) continue;

        std::vector<std::int64_t> ids;
        ids.reserve(members.size());
        for (int idx : members) {
            ids.push_back(segments[idx].id);
            outliers.erase(segments[idx].id);
        }
        kept.emplace_back(members.front(), make_observation(v, std::move(ids)));
    }

    std::sort(kept.begin(), kept.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [_, obs] : kept) result.clusters.push_back(std::move(obs));
    result.outlier_ids.assign(outliers.begin(), outliers.end());
    return result;
}

}  // namespace linemap
