#include <benchmark/benchmark.h>

#include <random>

#include "linemap/estimator.hpp"
#include "linemap/experiments.hpp"
#include "linemap/factors.hpp"
#include "linemap/geometry.hpp"
#include "linemap/simulator.hpp"
#include "linemap/vp_detect.hpp"

namespace {

using namespace linemap;

PluckerLine bench_line() { return plucker_from_points({-1.0, 0.4, 3.0}, {1.0, 0.5, 3.2}).normalized(); }

CameraPose bench_pose() {
    CameraPose pose;
    pose.p = Eigen::Vector3d(0.2, -0.1, 0.0);
    pose.R = look_at_rotation(pose.p, Eigen::Vector3d(0, 0, 3));
    return pose;
}

void BM_LineJacobian(benchmark::State& state) {
    const CameraPose pose = bench_pose();
    const OrthonormalLine O = to_orthonormal(bench_line());
    const Segment2D obs{{-0.2, 0.13}, {0.25, 0.18}, 0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(line_jacobian(pose, O, obs));
    }
}
BENCHMARK(BM_LineJacobian);

void BM_VpJacobian(benchmark::State& state) {
    const CameraPose pose = bench_pose();
    const OrthonormalLine O = to_orthonormal(bench_line());
    for (auto _ : state) {
        benchmark::DoNotOptimize(vp_jacobian(pose, O, Eigen::Vector2d(0.4, 0.1)));
    }
}
BENCHMARK(BM_VpJacobian);

void BM_TriangulateLine(benchmark::State& state) {
    CameraPose pose1 = bench_pose();
    CameraPose pose2 = bench_pose();
    pose2.p += Eigen::Vector3d(0.3, 0.1, 0.0);
    const Segment2D obs1{{-0.2, 0.13}, {0.25, 0.18}, 0};
    const Segment2D obs2{{-0.3, 0.10}, {0.15, 0.15}, 0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(try_triangulate_line(obs1, pose1, obs2, pose2));
    }
}
BENCHMARK(BM_TriangulateLine);

std::vector<Segment2D> pencil_segments(int per_vp) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    const Eigen::Vector2d vps[3] = {{0.9, 0.1}, {-0.8, 0.4}, {0.05, -0.9}};
    std::vector<Segment2D> segs;
    std::int64_t id = 0;
    for (const auto& vp : vps) {
        for (int i = 0; i < per_vp; ++i) {
            const Eigen::Vector2d anchor(u(rng), u(rng));
            const Eigen::Vector2d dir = (vp - anchor).normalized();
            segs.push_back({anchor, anchor + 0.4 * dir, id++});
        }
    }
    return segs;
}

void BM_JLinkageCluster(benchmark::State& state) {
    const std::vector<Segment2D> segs = pencil_segments(static_cast<int>(state.range(0)));
    JLinkageParams params;
    params.rng_seed = 5;
    for (auto _ : state) {
        benchmark::DoNotOptimize(jlinkage_cluster(segs, params));
    }
}
BENCHMARK(BM_JLinkageCluster)->Arg(10)->Arg(20);

void BM_WindowSolve(benchmark::State& state) {
    ExperimentConfig config;
    config.scene.lines_per_direction = 4;
    config.scene.unstructured_lines = 2;
    config.trajectory.kind = TrajectoryKind::orbit;
    config.trajectory.frame_count = 6;
    config.window_size = 6;
    config.noise_sigma_px = 1.0;
    const Dataset dataset = simulate_dataset(config, 42);
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_solve(dataset, config));
    }
}
BENCHMARK(BM_WindowSolve)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
