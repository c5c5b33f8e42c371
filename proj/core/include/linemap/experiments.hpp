#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "linemap/dataset_io.hpp"
#include "linemap/estimator.hpp"
#include "linemap/observability.hpp"
#include "linemap/vp_detect.hpp"

namespace linemap {

enum class VpSource { truth, jlinkage };

// Resolved batch-experiment configuration. Loaded from a single JSON file;
// command-line flags override individual fields.
struct ExperimentConfig {
    SceneSpec scene;
    TrajectorySpec trajectory;
    double noise_sigma_px = 1.0;  // endpoint noise, pixel-equivalent
    double fov_deg = 90.0;
    double f_virtual = kVirtualFocal;
    double outlier_rate = 0.0;
    int window_size = 6;
    VpSource vp_source = VpSource::truth;
    bool use_vp_factors = true;
    SolveOptions solver;
    JLinkageParams jlinkage;
    std::vector<std::uint64_t> seeds = {1};
    std::string out_dir = "out";
};

ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);
// Deterministic serialization of the resolved config (for result embedding).
std::string experiment_config_to_json(const ExperimentConfig& config);

Dataset simulate_dataset(const ExperimentConfig& config, std::uint64_t seed);

// Measurements for one frame of a dataset under the configured VP source.
// For VpSource::jlinkage, clustering accuracy against the labels is appended
// to `accuracy_log` when non-null.
MeasurementSet measurements_for_frame(const Dataset& dataset, const FrameBundle& bundle,
                                      const ExperimentConfig& config,
                                      std::vector<double>* accuracy_log = nullptr);

struct LineResult {
    std::int64_t track_id = -1;
    int direction_class = -1;
    bool degenerate_init = false;
    bool had_vp = false;
    double direction_error = 0.0;   // radians
    double distance_error = 0.0;    // meters
    int rank_line = 0;
    int rank_vp = 0;
    int rank_total = 0;
    bool slope_degenerate = false;
};

struct SolveRunResult {
    std::uint64_t seed = 0;
    double pose_rmse = 0.0;
    double final_cost = 0.0;
    bool vp_factors = true;
    std::vector<SolveStats> window_stats;
    std::vector<LineResult> lines;
    double median_direction_error = 0.0;
    double median_distance_error = 0.0;
    std::optional<double> clustering_accuracy;  // only for VpSource::jlinkage
};

// Sliding-window estimation over a dataset; per-line metrics against the
// dataset's ground truth and per-line observability reports at the solution.
SolveRunResult run_solve(const Dataset& dataset, const ExperimentConfig& config);

struct AbSeedResult {
    std::uint64_t seed = 0;
    SolveRunResult with_vp;
    SolveRunResult without_vp;
};

struct AbReport {
    std::vector<AbSeedResult> per_seed;
    double with_median_direction_error = 0.0;     // pooled over all lines and seeds
    double without_median_direction_error = 0.0;  // radians
    double improvement_ratio = 0.0;               // without / with
    double with_rank4_fraction = 0.0;             // VP-covered lines with full-rank information
    double without_rank_le2_fraction = 0.0;
};

AbReport run_ab_degeneracy(const ExperimentConfig& config);

struct FimLineEntry {
    std::int64_t track_id = -1;
    int direction_class = -1;
    bool had_vp = false;
    FimReport report;
};

struct FimAudit {
    std::vector<FimLineEntry> lines;
    int count_rank4 = 0;  // never reached by a single view; kept for the audit format
    int count_rank3 = 0;  // VP-covered lines: direction observable, depth slide blind
    int count_rank_le2 = 0;
    int count_slope_degenerate = 0;
};

// Per-line observability at ground-truth states, anchored at the latest
// observing frame of each line.
FimAudit run_fim(const Dataset& dataset, const ExperimentConfig& config);

double median(std::vector<double> values);

}  // namespace linemap
