#include "linemap/estimator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <set>

#include "linemap/observability.hpp"

namespace linemap {

const char* to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::converged_gradient: return "converged_gradient";
        case TerminationReason::converged_step: return "converged_step";
        case TerminationReason::max_iterations: return "max_iterations";
        case TerminationReason::stalled: return "stalled";
    }
    return "unknown";
}

const FramePose* WindowState::find_pose(std::int64_t frame_id) const {
    for (const FramePose& f : poses) {
        if (f.frame_id == frame_id) return &f;
    }
    return nullptr;
}

FramePose* WindowState::find_pose(std::int64_t frame_id) {
    for (FramePose& f : poses) {
        if (f.frame_id == frame_id) return &f;
    }
    return nullptr;
}

namespace {

// plane-constrained line at nominal depth along the observed segment
LineState mid_depth_line(const Segment2D& seg, const CameraPose& pose, double depth) {
    const RigidTransform cam = pose.camera_in_world();
    const Eigen::Vector3d Xs = cam.p + depth * (cam.R * seg.homogeneous_start()).normalized();
    const Eigen::Vector3d Xe = cam.p + depth * (cam.R * seg.homogeneous_end()).normalized();
    return {to_orthonormal(plucker_from_points(Xs, Xe).normalized()), true};
}

double range_from_camera(const PluckerLine& line, const Eigen::Vector3d& center) {
    const Eigen::Vector3d q = line.closest_point_to_origin();
    const Eigen::Vector3d d = line.d.normalized();
    const Eigen::Vector3d delta = center - q;
    return (delta - delta.dot(d) * d).norm();
}

}  // namespace

InitReport initialize_lines(WindowState& window, const MeasurementSet& meas,
                            const SolveOptions& opts, const Intrinsics& K) {
    (void)K;  // observations are already on the normalized plane
    InitReport report;

    std::map<std::int64_t, std::vector<const LineObsEntry*>> by_track;
    for (const LineObsEntry& e : meas.line_obs) {
        if (window.find_pose(e.frame_id) != nullptr) {
            by_track[e.track_id].push_back(&e);
        }
    }

    for (auto& [track, obs] : by_track) {
        if (window.lines.count(track) > 0) continue;  // warm start
        if (obs.size() < 2) {
            report.skipped_too_short.push_back(track);
            continue;
        }
        std::sort(obs.begin(), obs.end(), [](const LineObsEntry* a, const LineObsEntry* b) {
            return a->frame_id < b->frame_id;
        });
        const LineObsEntry& first = *obs.front();
        const LineObsEntry& last = *obs.back();
        const CameraPose& pose_first = window.find_pose(first.frame_id)->pose;
        const CameraPose& pose_last = window.find_pose(last.frame_id)->pose;

        const TriangulationAttempt att =
            try_triangulate_line(first.seg, pose_first, last.seg, pose_last);
        bool degenerate = att.degenerate;
        if (!degenerate) {
            // implausible range means the triangulation blew up along the
            // near-parallel plane intersection; treat like a degenerate track
            const double range = range_from_camera(att.line, pose_first.camera_in_world().p);
            if (!(range >= opts.min_init_range && range <= opts.max_init_range)) {
                degenerate = true;
            }
        }

        if (degenerate) {
            window.lines[track] = mid_depth_line(first.seg, pose_first, opts.init_depth);
            report.degenerate.push_back(track);
        } else {
            window.lines[track] = LineState{to_orthonormal(att.line), false};
        }
        report.initialized.push_back(track);
    }
    return report;
}

Problem::Problem(WindowState window, MeasurementSet meas, SolveOptions opts, Intrinsics K)
    : window_(std::move(window)), meas_(std::move(meas)), opts_(opts), K_(K) {
    for (const LineObsEntry& e : meas_.line_obs) {
        if (window_.find_pose(e.frame_id) == nullptr) {
            throw InconsistentIds("line observation references unknown frame " +
                                  std::to_string(e.frame_id));
        }
        if (window_.lines.find(e.track_id) == window_.lines.end()) {
            throw InconsistentIds("line observation references unknown track " +
                                  std::to_string(e.track_id));
        }
    }
    if (opts_.use_vp_factors) {
        for (const VpObsEntry& e : meas_.vp_obs) {
            if (window_.find_pose(e.frame_id) == nullptr ||
                window_.lines.find(e.track_id) == window_.lines.end()) {
                throw InconsistentIds("vanishing point observation references unknown ids");
            }
        }
    }

    int col = 0;
    for (const FramePose& f : window_.poses) {
        if (!f.fixed) {
            pose_offset_[f.frame_id] = col;
            block_ids_.push_back("pose/" + std::to_string(f.frame_id));
            col += 6;
        }
    }
    for (const auto& [track, _] : window_.lines) {
        line_offset_[track] = col;
        block_ids_.push_back("line/" + std::to_string(track));
        col += 4;
    }
    n_params_ = col;

    n_rows_ = 2 * static_cast<int>(meas_.line_obs.size());
    if (opts_.use_vp_factors) {
        for (const VpObsEntry& e : meas_.vp_obs) {
            if (e.is_finite) n_rows_ += 2;
        }
    }
}

std::optional<double> Problem::cost(const WindowState& state) const {
    double total = 0.0;
    const double inv_sl = 1.0 / opts_.sigma_line;
    const double inv_sv = 1.0 / opts_.sigma_vp;

    try {
        for (const LineObsEntry& e : meas_.line_obs) {
            const CameraPose& pose = state.find_pose(e.frame_id)->pose;
            const PluckerLine L_c =
                transform_line(to_plucker(state.lines.at(e.track_id).O, Frame::world), pose);
            const Eigen::Vector2d r =
                line_residual(project_line(L_c, K_), e.seg.p_s, e.seg.p_e) * inv_sl;
            total += robust_weight(opts_.line_loss, r.squaredNorm()).rho;
        }
        if (opts_.use_vp_factors) {
            for (const VpObsEntry& e : meas_.vp_obs) {
                if (!e.is_finite) continue;
                const CameraPose& pose = state.find_pose(e.frame_id)->pose;
                const PluckerLine L_c =
                    transform_line(to_plucker(state.lines.at(e.track_id).O, Frame::world), pose);
                const Eigen::Vector3d v = K_.K() * L_c.d;
                if (std::abs(v.z()) <= kEpsV3) {
                    // estimate projects to infinity: the factor is undefined, so it
                    // contributes the saturation value of its (bounded) loss
                    if (opts_.vp_loss.kind == LossKind::arctan) {
                        total += opts_.vp_loss.scale * opts_.vp_loss.scale * M_PI_2;
                        continue;
                    }
                    return std::nullopt;
                }
                const Eigen::Vector2d r = vp_residual(e.p_v, v) * inv_sv;
                total += robust_weight(opts_.vp_loss, r.squaredNorm()).rho;
            }
        }
    } catch (const Error&) {
        return std::nullopt;
    }
    return total;
}

Problem::Linearization Problem::linearize(const WindowState& state) const {
    Linearization lin;
    lin.H = Eigen::MatrixXd::Zero(n_params_, n_params_);
    lin.g = Eigen::VectorXd::Zero(n_params_);
    const double inv_sl = 1.0 / opts_.sigma_line;
    const double inv_sv = 1.0 / opts_.sigma_vp;

    auto add_factor = [&](std::int64_t frame_id, std::int64_t track_id,
                          const Eigen::Vector2d& r_white, Eigen::Matrix<double, 2, 6> Jp,
                          Eigen::Matrix<double, 2, 4> Jl, const RobustLoss& loss) {
        const LossEval w = robust_weight(loss, r_white.squaredNorm());
        const auto pose_it = pose_offset_.find(frame_id);
        const int lc = line_offset_.at(track_id);

        if (pose_it != pose_offset_.end()) {
            const int pc = pose_it->second;
            lin.H.block<6, 6>(pc, pc) += w.drho * Jp.transpose() * Jp;
            lin.H.block<6, 4>(pc, lc) += w.drho * Jp.transpose() * Jl;
            lin.H.block<4, 6>(lc, pc) += w.drho * Jl.transpose() * Jp;
            lin.g.segment<6>(pc) += w.drho * Jp.transpose() * r_white;
        }
        lin.H.block<4, 4>(lc, lc) += w.drho * Jl.transpose() * Jl;
        lin.g.segment<4>(lc) += w.drho * Jl.transpose() * r_white;
        lin.cost += w.rho;
    };

    try {
        for (const LineObsEntry& e : meas_.line_obs) {
            const CameraPose& pose = state.find_pose(e.frame_id)->pose;
            LineResidualEval ev = line_jacobian(pose, state.lines.at(e.track_id).O, e.seg, K_);
            add_factor(e.frame_id, e.track_id, ev.r * inv_sl, ev.J_pose * inv_sl,
                       ev.J_line * inv_sl, opts_.line_loss);
        }
        if (opts_.use_vp_factors) {
            for (const VpObsEntry& e : meas_.vp_obs) {
                if (!e.is_finite) continue;
                const CameraPose& pose = state.find_pose(e.frame_id)->pose;
                const PluckerLine L_c =
                    transform_line(to_plucker(state.lines.at(e.track_id).O, Frame::world), pose);
                if (std::abs((K_.K() * L_c.d).z()) <= kEpsV3) {
                    if (opts_.vp_loss.kind == LossKind::arctan) {
                        lin.cost += opts_.vp_loss.scale * opts_.vp_loss.scale * M_PI_2;
                        continue;
                    }
                    return lin;  // invalid
                }
                VpResidualEval ev = vp_jacobian(pose, state.lines.at(e.track_id).O, e.p_v, K_);
                add_factor(e.frame_id, e.track_id, ev.r * inv_sv, ev.J_pose * inv_sv,
                           ev.J_line * inv_sv, opts_.vp_loss);
            }
        }
    } catch (const Error&) {
        return lin;  // valid stays false
    }
    lin.valid = true;
    return lin;
}

WindowState Problem::apply_step(const WindowState& state, const Eigen::VectorXd& delta) const {
    WindowState out = state;
    for (FramePose& f : out.poses) {
        const auto it = pose_offset_.find(f.frame_id);
        if (it == pose_offset_.end()) continue;
        const int pc = it->second;
        f.pose.p += delta.segment<3>(pc);
        f.pose.R = f.pose.R * so3_exp(delta.segment<3>(pc + 3));
    }
    for (auto& [track, ls] : out.lines) {
        const int lc = line_offset_.at(track);
        ls.O = orthonormal_update(ls.O, delta.segment<4>(lc));
    }
    return out;
}

std::optional<Eigen::Matrix4d> Problem::line_block(const Eigen::MatrixXd& H,
                                                   std::int64_t track_id) const {
    const auto it = line_offset_.find(track_id);
    if (it == line_offset_.end()) return std::nullopt;
    return Eigen::Matrix4d(H.block<4, 4>(it->second, it->second));
}

Problem build_problem(const WindowState& window, const MeasurementSet& meas,
                      const SolveOptions& opts, const Intrinsics& K) {
    return Problem(window, meas, opts, K);
}

namespace {

// variable blocks implicated in the rank deficiency of H
std::vector<std::string> deficient_blocks(const Eigen::MatrixXd& H,
                                          const std::vector<std::string>& block_ids,
                                          double rank_tol) {
    std::vector<std::string> out;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(H, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return out;
    const double tol = rank_tol * sv[0];

    // union of null-space support, attributed per block
    std::vector<int> block_col(H.cols());
    {
        int col = 0;
        for (size_t b = 0; b < block_ids.size(); ++b) {
            const int width = block_ids[b].rfind("pose/", 0) == 0 ? 6 : 4;
            for (int k = 0; k < width && col < H.cols(); ++k) block_col[col++] = static_cast<int>(b);
        }
    }
    std::set<int> hit;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] > tol) continue;
        const Eigen::VectorXd v = svd.matrixV().col(i);
        const double vmax = v.cwiseAbs().maxCoeff();
        for (Eigen::Index c = 0; c < v.size(); ++c) {
            if (std::abs(v[c]) > 0.1 * vmax) hit.insert(block_col[c]);
        }
    }
    for (int b : hit) out.push_back(block_ids[b]);
    return out;
}

}  // namespace

std::pair<WindowState, SolveStats> optimize(const Problem& problem) {
    const SolveOptions& opts = problem.options();
    WindowState state = problem.window();
    SolveStats stats;

    if (problem.num_parameters() == 0) {
        throw PreconditionError("problem has no free parameters");
    }

    Problem::Linearization lin = problem.linearize(state);
    if (!lin.valid) {
        throw PreconditionError("initial state has undefined factors");
    }
    stats.initial_cost = lin.cost;
    stats.cost_trace.push_back(lin.cost);

    // structural rank check on the undamped normal matrix
    if (numeric_rank(lin.H, opts.rank_tol) < problem.num_parameters()) {
        std::vector<std::string> ids =
            deficient_blocks(lin.H, problem.parameter_block_ids(), opts.rank_tol);
        if (opts.fail_on_singular) {
            throw SingularNormalEquations("normal equations are rank-deficient", std::move(ids));
        }
        stats.singular_variable_ids = std::move(ids);
    }

    double cost = lin.cost;
    double lambda = opts.initial_lm_damping;
    TerminationReason reason = TerminationReason::max_iterations;

    double grad_inf = lin.g.cwiseAbs().maxCoeff();
    if (grad_inf <= opts.gradient_tolerance) {
        reason = TerminationReason::converged_gradient;
    } else {
        while (stats.iterations < opts.max_iterations) {
            ++stats.iterations;
            Eigen::MatrixXd damped = lin.H;
            damped.diagonal().array() += lambda;
            const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
            if (ldlt.info() != Eigen::Success) {
                ++stats.rejected_steps;
                lambda *= opts.damping_up;
                if (lambda > 1e14) {
                    reason = TerminationReason::stalled;
                    break;
                }
                continue;
            }
            const Eigen::VectorXd delta = ldlt.solve(-lin.g);
            const double step_norm = delta.cwiseAbs().maxCoeff();
            if (step_norm <= opts.step_tolerance) {
                reason = TerminationReason::converged_step;
                break;
            }
            if (step_norm > opts.max_step_norm) {
                ++stats.rejected_steps;
                lambda *= opts.damping_up;
                if (lambda > 1e14) {
                    reason = TerminationReason::stalled;
                    break;
                }
                continue;
            }

            const WindowState candidate = problem.apply_step(state, delta);
            const std::optional<double> new_cost = problem.cost(candidate);
            if (new_cost.has_value() && *new_cost < cost) {
                state = candidate;
                cost = *new_cost;
                stats.cost_trace.push_back(cost);
                ++stats.accepted_steps;
                lambda = std::max(lambda * opts.damping_down, 1e-15);

                lin = problem.linearize(state);
                if (!lin.valid) {
                    reason = TerminationReason::stalled;
                    break;
                }
                grad_inf = lin.g.cwiseAbs().maxCoeff();
                if (grad_inf <= opts.gradient_tolerance) {
                    reason = TerminationReason::converged_gradient;
                    break;
                }
            } else {
                ++stats.rejected_steps;
                lambda *= opts.damping_up;
                if (lambda > 1e14) {
                    reason = TerminationReason::stalled;
                    break;
                }
            }
        }
    }

    stats.final_cost = cost;
    stats.termination_reason = reason;
    stats.final_gradient_inf = grad_inf;
    return {std::move(state), std::move(stats)};
}

WindowState fix_gauge(WindowState window) {
    if (window.poses.size() < 2) {
        throw PreconditionError("gauge fixing needs at least two poses");
    }
    window.poses[0].fixed = true;
    window.poses[1].fixed = true;
    return window;
}

SlideResult slide_window(WindowState window, MeasurementSet meas, FramePose new_frame,
                         MeasurementSet new_meas) {
    SlideResult out;
    if (window.poses.empty()) {
        throw PreconditionError("cannot slide an empty window");
    }
    const std::int64_t dropped = window.poses.front().frame_id;
    window.poses.erase(window.poses.begin());
    window.poses.push_back(std::move(new_frame));

    auto drop_frame = [dropped](const auto& e) { return e.frame_id == dropped; };
    std::erase_if(meas.line_obs, drop_frame);
    std::erase_if(meas.vp_obs, drop_frame);
    meas.line_obs.insert(meas.line_obs.end(), new_meas.line_obs.begin(), new_meas.line_obs.end());
    meas.vp_obs.insert(meas.vp_obs.end(), new_meas.vp_obs.begin(), new_meas.vp_obs.end());

    std::set<std::int64_t> observed;
    for (const LineObsEntry& e : meas.line_obs) observed.insert(e.track_id);
    for (auto it = window.lines.begin(); it != window.lines.end();) {
        if (observed.count(it->first) == 0) {
            out.retired.emplace_back(it->first, it->second);
            it = window.lines.erase(it);
        } else {
            ++it;
        }
    }

    out.window = std::move(window);
    out.meas = std::move(meas);
    return out;
}

}  // namespace linemap
