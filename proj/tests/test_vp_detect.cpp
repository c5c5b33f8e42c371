#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "linemap/vp_detect.hpp"
#include "support/pencil_scene.hpp"

using namespace linemap;
using namespace linemap::testing;

namespace {

bool projectively_equal(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double tol = 1e-9) {
    return a.normalized().cross(b.normalized()).norm() < tol;
}

}  // namespace

TEST_CASE("vp_hypothesis intersects segment lines") {
    const Segment2D on_diag{{0.0, 0.0}, {0.5, 0.5}, 0};       // y = x
    const Segment2D horizontal{{0.0, 1.0}, {1.0, 1.0}, 1};    // y = 1
    const Eigen::Vector3d v = vp_hypothesis(on_diag, horizontal);
    CHECK(projectively_equal(v, {1, 1, 1}));

    SUBCASE("parallel segments meet at infinity") {
        const Segment2D y0{{0.0, 0.0}, {1.0, 0.0}, 2};
        const Segment2D y1{{0.0, 1.0}, {1.0, 1.0}, 3};
        const Eigen::Vector3d vi = vp_hypothesis(y0, y1);
        CHECK(projectively_equal(vi, {1, 0, 0}));
    }
    SUBCASE("identical segments are degenerate") {
        CHECK_THROWS_AS(vp_hypothesis(on_diag, on_diag), DegenerateHypothesis);
    }
}

TEST_CASE("consistency measures the midpoint-direction angle") {
    const Segment2D diag{{0.0, 0.0}, {0.5, 0.5}, 0};
    CHECK(consistency(diag, {1, 1, 1}) == doctest::Approx(0.0).epsilon(1e-12));

    const Segment2D y0{{0.0, 0.0}, {1.0, 0.0}, 1};
    CHECK(consistency(y0, {0, 1, 0}) == doctest::Approx(M_PI / 2));

    SUBCASE("invariant to endpoint swap") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int i = 0; i < 100; ++i) {
            Segment2D s{{u(rng), u(rng)}, {u(rng), u(rng)}, 0};
            if (s.length() < 1e-3) continue;
            const Eigen::Vector3d v(u(rng), u(rng), u(rng));
            if (v.norm() < 1e-3) continue;
            Segment2D swapped{s.p_e, s.p_s, 0};
            CHECK(consistency(s, v) == doctest::Approx(consistency(swapped, v)).epsilon(1e-12));
        }
    }
}

TEST_CASE("fit_vp recovers exact intersections") {
    // five exact lines through (2, 1)
    const Eigen::Vector2d vp(2.0, 1.0);
    std::vector<Segment2D> members;
    for (int i = 0; i < 5; ++i) {
        const double th = 0.3 + 0.5 * i;
        const Eigen::Vector2d a(0.3 * std::cos(th), 0.3 * std::sin(th));
        const Eigen::Vector2d dir = (vp - a).normalized();
        members.push_back({a, a + 0.4 * dir, i});
    }
    const Eigen::Vector3d v = fit_vp(members);
    CHECK(projectively_equal(v, {2, 1, 1}, 1e-9));

    SUBCASE("two members reduce to the pairwise hypothesis") {
        const std::vector<Segment2D> two{members[0], members[1]};
        CHECK(projectively_equal(fit_vp(two), vp_hypothesis(members[0], members[1]), 1e-9));
    }
    SUBCASE("identical lines are ill-conditioned") {
        const std::vector<Segment2D> same{members[0], members[0], members[0]};
        CHECK_THROWS_AS(fit_vp(same), IllConditioned);
    }
}

TEST_CASE("fit_vp attains the global optimum of the quadratic form") {
    std::mt19937_64 rng(5);
    const PencilScene scene =
        make_pencil_scene(rng, {{0.9, 0.2}}, 8, 0.003, 0);
    const Eigen::Vector3d v = fit_vp(scene.segments);

    const auto residual = [&](const Eigen::Vector3d& cand) {
        double sum = 0;
        for (const Segment2D& s : scene.segments) {
            const double r = s.homogeneous_line().normalized().dot(cand.normalized());
            sum += r * r;
        }
        return sum;
    };
    const double best = residual(v);
    for (size_t i = 0; i < scene.segments.size(); ++i) {
        for (size_t j = i + 1; j < scene.segments.size(); ++j) {
            CHECK(best <= residual(vp_hypothesis(scene.segments[i], scene.segments[j])) + 1e-15);
        }
    }
}

TEST_CASE("jlinkage clusters noise-free pencils exactly") {
    std::mt19937_64 rng(7);
    const std::vector<Eigen::Vector2d> vps{{0.9, 0.1}, {-0.8, 0.4}, {0.05, -0.9}};
    const PencilScene scene = make_pencil_scene(rng, vps, 10, 0.0, 0);

    JLinkageParams params;
    params.rng_seed = 1;
    const ClusterResult result = jlinkage_cluster(scene.segments, params);

    REQUIRE(result.clusters.size() == 3);
    const PencilScore score = score_pencils(scene, result);
    CHECK(score.accuracy == doctest::Approx(1.0));
    CHECK(score.max_vp_error < 1e-6);
    CHECK(result.outlier_ids.empty());
}

TEST_CASE("jlinkage is a deterministic partition") {
    std::mt19937_64 rng(11);
    const std::vector<Eigen::Vector2d> vps{{0.9, 0.1}, {-0.8, 0.4}, {0.05, -0.9}};
    const PencilScene scene = make_pencil_scene(rng, vps, 10, 0.002, 3);

    JLinkageParams params;
    params.rng_seed = 9;
    const ClusterResult a = jlinkage_cluster(scene.segments, params);
    const ClusterResult b = jlinkage_cluster(scene.segments, params);

    REQUIRE(a.clusters.size() == b.clusters.size());
    for (size_t i = 0; i < a.clusters.size(); ++i) {
        CHECK(a.clusters[i].member_ids == b.clusters[i].member_ids);
        CHECK(a.clusters[i].p_v == b.clusters[i].p_v);
    }
    CHECK(a.outlier_ids == b.outlier_ids);

    // partition: every id exactly once across clusters + outliers
    std::map<std::int64_t, int> seen;
    for (const auto& c : a.clusters) {
        for (std::int64_t id : c.member_ids) seen[id]++;
    }
    for (std::int64_t id : a.outlier_ids) seen[id]++;
    CHECK(seen.size() == scene.segments.size());
    for (const auto& [id, count] : seen) CHECK(count == 1);
}

TEST_CASE("jlinkage recovers noisy pencils with outliers") {
    const std::vector<Eigen::Vector2d> vps{{0.9, 0.1}, {-0.8, 0.4}, {0.05, -0.9}};
    std::vector<double> accuracies;
    for (int seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(100 + seed);
        const PencilScene scene = make_pencil_scene(rng, vps, 10, 0.001, 3);
        JLinkageParams params;
        params.rng_seed = seed;
        const ClusterResult result = jlinkage_cluster(scene.segments, params);
        accuracies.push_back(score_pencils(scene, result).accuracy);
    }
    std::sort(accuracies.begin(), accuracies.end());
    const double median = 0.5 * (accuracies[9] + accuracies[10]);
    CHECK(median >= 0.95);
}

TEST_CASE("cluster members always satisfy the consensus threshold") {
    std::mt19937_64 rng(13);
    const std::vector<Eigen::Vector2d> vps{{0.9, 0.1}, {-0.8, 0.4}};
    const PencilScene scene = make_pencil_scene(rng, vps, 12, 0.002, 4);
    JLinkageParams params;
    params.rng_seed = 3;
    const ClusterResult result = jlinkage_cluster(scene.segments, params);
    std::map<std::int64_t, const Segment2D*> by_id;
    for (const Segment2D& s : scene.segments) by_id[s.id] = &s;
    for (const auto& c : result.clusters) {
        for (std::int64_t id : c.member_ids) {
            CHECK(consistency(*by_id.at(id), c.v) < params.consensus_threshold);
        }
    }
}

TEST_CASE("no cap on the number of vanishing points") {
    std::mt19937_64 rng(17);
    const std::vector<Eigen::Vector2d> vps{
        {0.9, 0.1}, {-0.8, 0.4}, {0.05, -0.9}, {0.7, -0.7}, {-0.5, -0.6}};
    const PencilScene scene = make_pencil_scene(rng, vps, 8, 0.0, 0);
    JLinkageParams params;
    params.rng_seed = 2;
    params.num_hypotheses = 800;
    const ClusterResult result = jlinkage_cluster(scene.segments, params);
    CHECK(result.clusters.size() == 5);
}

TEST_CASE("parallel pencils produce an infinite vanishing point") {
    std::vector<Segment2D> segments;
    for (int i = 0; i < 5; ++i) {
        const double y = -0.4 + 0.2 * i;
        segments.push_back({{-0.5, y}, {0.5, y}, i});
    }
    // anchor pencil so hypotheses also sample finite candidates
    segments.push_back({{0.0, 0.0}, {0.3, 0.4}, 5});
    segments.push_back({{0.1, 0.0}, {0.35, 0.45}, 6});

    JLinkageParams params;
    params.rng_seed = 4;
    const ClusterResult result = jlinkage_cluster(segments, params);
    bool found_infinite = false;
    for (const auto& c : result.clusters) {
        if (!c.is_finite) {
            found_infinite = true;
            CHECK(std::abs(std::abs(c.p_v.x()) - 1.0) < 1e-9);  // +-x direction
        }
    }
    CHECK(found_infinite);
}

TEST_CASE("jlinkage rejects singleton input") {
    const std::vector<Segment2D> one{{{0, 0}, {1, 0}, 0}};
    CHECK_THROWS_AS(jlinkage_cluster(one, JLinkageParams{}), PreconditionError);
}
