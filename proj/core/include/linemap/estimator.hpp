#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "linemap/factors.hpp"
#include "linemap/geometry.hpp"

namespace linemap {

struct LineState {
    OrthonormalLine O;  // world frame
    bool degenerate_init = false;
};

struct FramePose {
    std::int64_t frame_id = 0;
    CameraPose pose;
    bool fixed = false;
};

struct WindowState {
    std::vector<FramePose> poses;  // ascending frame_id
    std::map<std::int64_t, LineState> lines;

    const FramePose* find_pose(std::int64_t frame_id) const;
    FramePose* find_pose(std::int64_t frame_id);
};

struct LineObsEntry {
    std::int64_t frame_id = 0;
    std::int64_t track_id = 0;
    Segment2D seg;
};

struct VpObsEntry {
    std::int64_t frame_id = 0;
    std::int64_t track_id = 0;
    Eigen::Vector2d p_v = Eigen::Vector2d::Zero();
    bool is_finite = true;
};

struct MeasurementSet {
    std::vector<LineObsEntry> line_obs;
    std::vector<VpObsEntry> vp_obs;
};

struct SolveOptions {
    int max_iterations = 50;
    double initial_lm_damping = 1e-4;
    double damping_up = 10.0;
    double damping_down = 0.5;
    double gradient_tolerance = 1e-10;
    double step_tolerance = 1e-12;
    // steps larger than this (inf norm, meters/radians) are rejected and the
    // damping raised; keeps near-flat directions from running away
    double max_step_norm = 0.5;
    RobustLoss line_loss{LossKind::huber, 1.5};
    RobustLoss vp_loss{LossKind::arctan, 1.0};
    double sigma_line = 1.5 / kVirtualFocal;  // normalized-plane units
    double sigma_vp = 1.5 / kVirtualFocal;
    bool use_vp_factors = true;
    bool fail_on_singular = true;  // throw vs record-and-damp on a singular normal matrix
    // window normal matrices are legitimately ill-conditioned; only ratios
    // near round-off indicate a structural null space
    double rank_tol = 1e-12;
    // degenerate-initialization heuristic
    double init_depth = 3.0;
    double min_init_range = 0.2;
    double max_init_range = 30.0;
};

enum class TerminationReason { converged_gradient, converged_step, max_iterations, stalled };

const char* to_string(TerminationReason r);

struct SolveStats {
    int iterations = 0;  // accepted + rejected attempts
    int accepted_steps = 0;
    int rejected_steps = 0;
    double initial_cost = 0.0;
    double final_cost = 0.0;
    TerminationReason termination_reason = TerminationReason::max_iterations;
    std::vector<double> cost_trace;  // initial cost plus one entry per accepted step
    double final_gradient_inf = 0.0;
    std::vector<std::string> singular_variable_ids;  // filled when the undamped normal matrix is rank-deficient
};

struct InitReport {
    std::vector<std::int64_t> initialized;
    std::vector<std::int64_t> degenerate;         // kept, but flagged degenerate_init
    std::vector<std::int64_t> skipped_too_short;  // TrackTooShort, not initialized
};

// Triangulate every track with >= 2 window observations from its first and
// latest observing frames; degenerate or implausible triangulations fall back
// to a plane-constrained line at nominal depth and are kept flagged.
InitReport initialize_lines(WindowState& window, const MeasurementSet& meas,
                            const SolveOptions& opts, const Intrinsics& K = {});

// Nonlinear least-squares problem over the free poses (6 DoF each) and lines
// (4 DoF each) of a window. Vanishing point factors add rows, never parameters.
class Problem {
  public:
    Problem(WindowState window, MeasurementSet meas, SolveOptions opts, Intrinsics K = {});

    int num_parameters() const { return n_params_; }
    int num_residual_rows() const { return n_rows_; }
    const WindowState& window() const { return window_; }
    const SolveOptions& options() const { return opts_; }
    const std::vector<std::string>& parameter_block_ids() const { return block_ids_; }

    // robustified cost; nullopt when a factor is undefined at this state
    std::optional<double> cost(const WindowState& state) const;

    struct Linearization {
        Eigen::MatrixXd H;
        Eigen::VectorXd g;  // sum of w * J^T W r (gradient/2 of the robust cost)
        double cost = 0.0;
        bool valid = false;
    };
    Linearization linearize(const WindowState& state) const;

    WindowState apply_step(const WindowState& state, const Eigen::VectorXd& delta) const;

    // diagonal block of H belonging to a line, if the line is a parameter
    std::optional<Eigen::Matrix4d> line_block(const Eigen::MatrixXd& H,
                                              std::int64_t track_id) const;

  private:
    WindowState window_;
    MeasurementSet meas_;
    SolveOptions opts_;
    Intrinsics K_;
    std::map<std::int64_t, int> pose_offset_;  // frame_id -> column, free poses only
    std::map<std::int64_t, int> line_offset_;  // track_id -> column
    std::vector<std::string> block_ids_;
    int n_params_ = 0;
    int n_rows_ = 0;
};

Problem build_problem(const WindowState& window, const MeasurementSet& meas,
                      const SolveOptions& opts, const Intrinsics& K = {});

// Levenberg-Marquardt with iteratively reweighted robust losses. Accepted
// steps strictly decrease the robustified cost.
std::pair<WindowState, SolveStats> optimize(const Problem& problem);

// Freeze the first two poses (7 gauge DoF of monocular line-only adjustment).
WindowState fix_gauge(WindowState window);

struct SlideResult {
    WindowState window;
    MeasurementSet meas;
    std::vector<std::pair<std::int64_t, LineState>> retired;
};

// Drop the oldest frame and its measurements; retire lines that lose all
// observations. No prior is synthesized.
SlideResult slide_window(WindowState window, MeasurementSet meas, FramePose new_frame,
                         MeasurementSet new_meas);

}  // namespace linemap
