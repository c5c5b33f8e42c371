#include "linemap/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace linemap {

using nlohmann::json;

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

Eigen::Vector3d vec3_from(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

void read_if(const json& j, const char* key, double& out) {
    if (j.contains(key)) out = j.at(key);
}
void read_if(const json& j, const char* key, int& out) {
    if (j.contains(key)) out = j.at(key);
}
void read_if(const json& j, const char* key, bool& out) {
    if (j.contains(key)) out = j.at(key);
}
void read_if(const json& j, const char* key, std::uint64_t& out) {
    if (j.contains(key)) out = j.at(key).get<std::uint64_t>();
}
void read_if(const json& j, const char* key, Eigen::Vector3d& out) {
    if (j.contains(key)) out = vec3_from(j.at(key));
}

RobustLoss loss_from(const json& j, RobustLoss fallback) {
    RobustLoss loss = fallback;
    if (j.contains("kind")) {
        const std::string kind = j.at("kind");
        if (kind == "huber") {
            loss.kind = LossKind::huber;
        } else if (kind == "arctan") {
            loss.kind = LossKind::arctan;
        } else {
            throw ConfigError("unknown loss kind: " + kind);
        }
    }
    if (j.contains("scale")) loss.scale = j.at("scale");
    if (loss.scale <= 0) throw ConfigError("loss scale must be positive");
    return loss;
}

const char* loss_name(LossKind k) { return k == LossKind::huber ? "huber" : "arctan"; }

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    try {
        if (j.contains("scene")) {
            const json& s = j.at("scene");
            if (s.contains("structural_directions")) {
                c.scene.structural_directions.clear();
                for (const json& d : s.at("structural_directions")) {
                    const Eigen::Vector3d v = vec3_from(d);
                    if (v.norm() < 1e-12) throw ConfigError("zero structural direction");
                    c.scene.structural_directions.push_back(v.normalized());
                }
            }
            read_if(s, "lines_per_direction", c.scene.lines_per_direction);
            read_if(s, "unstructured_lines", c.scene.unstructured_lines);
            read_if(s, "box_center", c.scene.box_center);
            read_if(s, "box_half_extents", c.scene.box_half_extents);
        }
        if (j.contains("trajectory")) {
            const json& t = j.at("trajectory");
            if (t.contains("kind")) {
                const std::string kind = t.at("kind");
                if (kind == "orbit") {
                    c.trajectory.kind = TrajectoryKind::orbit;
                } else if (kind == "pure_translation") {
                    c.trajectory.kind = TrajectoryKind::pure_translation;
                } else if (kind == "forward_corridor") {
                    c.trajectory.kind = TrajectoryKind::forward_corridor;
                } else {
                    throw ConfigError("unknown trajectory kind: " + kind);
                }
            }
            read_if(t, "frame_count", c.trajectory.frame_count);
            read_if(t, "step_size", c.trajectory.step_size);
            if (t.contains("look_at")) {
                const std::string rule = t.at("look_at");
                if (rule == "scene_center") {
                    c.trajectory.look_at = LookAtRule::scene_center;
                } else if (rule == "fixed_forward") {
                    c.trajectory.look_at = LookAtRule::fixed_forward;
                } else {
                    throw ConfigError("unknown look_at rule: " + rule);
                }
            }
            read_if(t, "target", c.trajectory.target);
            read_if(t, "start", c.trajectory.start);
            read_if(t, "translation_direction", c.trajectory.translation_direction);
            read_if(t, "orbit_radius", c.trajectory.orbit_radius);
        }
        read_if(j, "noise_sigma_px", c.noise_sigma_px);
        read_if(j, "fov_deg", c.fov_deg);
        read_if(j, "f_virtual", c.f_virtual);
        read_if(j, "outlier_rate", c.outlier_rate);
        read_if(j, "window_size", c.window_size);
        if (j.contains("vp_source")) {
            const std::string src = j.at("vp_source");
            if (src == "truth") {
                c.vp_source = VpSource::truth;
            } else if (src == "jlinkage") {
                c.vp_source = VpSource::jlinkage;
            } else {
                throw ConfigError("unknown vp_source: " + src);
            }
        }
        read_if(j, "use_vp_factors", c.use_vp_factors);
        if (j.contains("solver")) {
            const json& s = j.at("solver");
            read_if(s, "max_iterations", c.solver.max_iterations);
            read_if(s, "initial_lm_damping", c.solver.initial_lm_damping);
            read_if(s, "damping_up", c.solver.damping_up);
            read_if(s, "damping_down", c.solver.damping_down);
            read_if(s, "gradient_tolerance", c.solver.gradient_tolerance);
            read_if(s, "step_tolerance", c.solver.step_tolerance);
            read_if(s, "fail_on_singular", c.solver.fail_on_singular);
            read_if(s, "rank_tol", c.solver.rank_tol);
            read_if(s, "init_depth", c.solver.init_depth);
            read_if(s, "min_init_range", c.solver.min_init_range);
            read_if(s, "max_init_range", c.solver.max_init_range);
            if (s.contains("line_loss")) c.solver.line_loss = loss_from(s.at("line_loss"), c.solver.line_loss);
            if (s.contains("vp_loss")) c.solver.vp_loss = loss_from(s.at("vp_loss"), c.solver.vp_loss);
            double sigma_line_px = -1, sigma_vp_px = -1;
            read_if(s, "sigma_line_px", sigma_line_px);
            read_if(s, "sigma_vp_px", sigma_vp_px);
            if (sigma_line_px > 0) c.solver.sigma_line = sigma_line_px / c.f_virtual;
            if (sigma_vp_px > 0) c.solver.sigma_vp = sigma_vp_px / c.f_virtual;
        }
        if (j.contains("jlinkage")) {
            const json& s = j.at("jlinkage");
            read_if(s, "num_hypotheses", c.jlinkage.num_hypotheses);
            read_if(s, "consensus_threshold", c.jlinkage.consensus_threshold);
            read_if(s, "min_cluster_size", c.jlinkage.min_cluster_size);
            read_if(s, "rng_seed", c.jlinkage.rng_seed);
        }
        if (j.contains("seeds")) {
            c.seeds.clear();
            for (const json& s : j.at("seeds")) c.seeds.push_back(s.get<std::uint64_t>());
        }
        if (j.contains("out_dir")) c.out_dir = j.at("out_dir");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }

    if (c.seeds.empty()) throw ConfigError("seeds must be non-empty");
    if (c.window_size < 2) throw ConfigError("window_size must be >= 2");
    if (c.trajectory.frame_count < 2) throw ConfigError("frame_count must be >= 2");
    if (c.noise_sigma_px < 0) throw ConfigError("noise_sigma_px must be >= 0");
    if (c.jlinkage.num_hypotheses < 1 || c.jlinkage.consensus_threshold <= 0 ||
        c.jlinkage.min_cluster_size < 2) {
        throw ConfigError("invalid jlinkage parameters");
    }
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("cannot open config file: " + path);
    }
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_experiment_config(buf.str());
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
    json j;
    json dirs = json::array();
    for (const auto& d : c.scene.structural_directions) dirs.push_back({d.x(), d.y(), d.z()});
    j["scene"] = {
        {"structural_directions", dirs},
        {"lines_per_direction", c.scene.lines_per_direction},
        {"unstructured_lines", c.scene.unstructured_lines},
        {"box_center", {c.scene.box_center.x(), c.scene.box_center.y(), c.scene.box_center.z()}},
        {"box_half_extents",
         {c.scene.box_half_extents.x(), c.scene.box_half_extents.y(), c.scene.box_half_extents.z()}},
    };
    const char* kind = c.trajectory.kind == TrajectoryKind::orbit ? "orbit"
                       : c.trajectory.kind == TrajectoryKind::pure_translation
                           ? "pure_translation"
                           : "forward_corridor";
    j["trajectory"] = {
        {"kind", kind},
        {"frame_count", c.trajectory.frame_count},
        {"step_size", c.trajectory.step_size},
        {"look_at",
         c.trajectory.look_at == LookAtRule::scene_center ? "scene_center" : "fixed_forward"},
        {"target", {c.trajectory.target.x(), c.trajectory.target.y(), c.trajectory.target.z()}},
        {"start", {c.trajectory.start.x(), c.trajectory.start.y(), c.trajectory.start.z()}},
        {"translation_direction",
         {c.trajectory.translation_direction.x(), c.trajectory.translation_direction.y(),
          c.trajectory.translation_direction.z()}},
        {"orbit_radius", c.trajectory.orbit_radius},
    };
    j["noise_sigma_px"] = c.noise_sigma_px;
    j["fov_deg"] = c.fov_deg;
    j["f_virtual"] = c.f_virtual;
    j["outlier_rate"] = c.outlier_rate;
    j["window_size"] = c.window_size;
    j["vp_source"] = c.vp_source == VpSource::truth ? "truth" : "jlinkage";
    j["use_vp_factors"] = c.use_vp_factors;
    j["solver"] = {
        {"max_iterations", c.solver.max_iterations},
        {"initial_lm_damping", c.solver.initial_lm_damping},
        {"damping_up", c.solver.damping_up},
        {"damping_down", c.solver.damping_down},
        {"gradient_tolerance", c.solver.gradient_tolerance},
        {"step_tolerance", c.solver.step_tolerance},
        {"fail_on_singular", c.solver.fail_on_singular},
        {"rank_tol", c.solver.rank_tol},
        {"init_depth", c.solver.init_depth},
        {"min_init_range", c.solver.min_init_range},
        {"max_init_range", c.solver.max_init_range},
        {"line_loss", {{"kind", loss_name(c.solver.line_loss.kind)}, {"scale", c.solver.line_loss.scale}}},
        {"vp_loss", {{"kind", loss_name(c.solver.vp_loss.kind)}, {"scale", c.solver.vp_loss.scale}}},
        {"sigma_line_px", c.solver.sigma_line * c.f_virtual},
        {"sigma_vp_px", c.solver.sigma_vp * c.f_virtual},
    };
    j["jlinkage"] = {
        {"num_hypotheses", c.jlinkage.num_hypotheses},
        {"consensus_threshold", c.jlinkage.consensus_threshold},
        {"min_cluster_size", c.jlinkage.min_cluster_size},
        {"rng_seed", c.jlinkage.rng_seed},
    };
    j["seeds"] = c.seeds;
    j["out_dir"] = c.out_dir;
    return j.dump();
}

Dataset simulate_dataset(const ExperimentConfig& config, std::uint64_t seed) {
    Dataset ds;
    ds.seed = seed;
    ds.scene_spec = config.scene;
    ds.scene_spec.rng_seed = seed;
    ds.trajectory_spec = config.trajectory;
    ds.render.noise_sigma = config.noise_sigma_px / config.f_virtual;
    ds.render.fov = config.fov_deg * M_PI / 180.0;
    ds.render.seed = seed;
    ds.render.outlier_rate = config.outlier_rate;
    ds.render.clip_box_center = config.scene.box_center;
    ds.render.clip_box_half_extents = 1.3 * config.scene.box_half_extents;

    ds.scene = make_scene(ds.scene_spec);
    const std::vector<CameraPose> poses = make_trajectory(ds.trajectory_spec);
    ds.bundles = render_observations(ds.scene, poses, ds.render);
    return ds;
}

namespace {

std::map<std::int64_t, int> line_classes(const Dataset& dataset) {
    std::map<std::int64_t, int> out;
    for (const SceneLine& sl : dataset.scene) out[sl.id] = sl.direction_class;
    return out;
}

}  // namespace

MeasurementSet measurements_for_frame(const Dataset& dataset, const FrameBundle& bundle,
                                      const ExperimentConfig& config,
                                      std::vector<double>* accuracy_log) {
    MeasurementSet meas;
    for (const Segment2D& seg : bundle.segments) {
        meas.line_obs.push_back({bundle.frame_id, seg.id, seg});
    }

    const auto classes = line_classes(dataset);
    if (config.vp_source == VpSource::truth) {
        for (const Segment2D& seg : bundle.segments) {
            const auto assoc = bundle.associations.find(seg.id);
            if (assoc == bundle.associations.end() || assoc->second < 0) continue;
            const auto cls = classes.find(assoc->second);
            if (cls == classes.end() || cls->second < 0) continue;
            const auto vp = bundle.vp_truth.find(cls->second);
            if (vp == bundle.vp_truth.end()) continue;
            meas.vp_obs.push_back({bundle.frame_id, seg.id, vp->second, true});
        }
        return meas;
    }

    // jlinkage source: cluster this frame's segments and hand each member its
    // cluster's fitted vanishing point
    if (bundle.segments.size() < 2) return meas;
    JLinkageParams params = config.jlinkage;
    params.rng_seed = config.jlinkage.rng_seed ^ (0x9e3779b97f4a7c15ULL * (bundle.frame_id + 1));
    const ClusterResult clusters = jlinkage_cluster(bundle.segments, params);

    int correct = 0, total = 0;
    std::map<std::int64_t, int> assigned_cluster;
    for (size_t ci = 0; ci < clusters.clusters.size(); ++ci) {
        for (std::int64_t id : clusters.clusters[ci].member_ids) {
            assigned_cluster[id] = static_cast<int>(ci);
        }
        if (!clusters.clusters[ci].is_finite) continue;
        for (std::int64_t id : clusters.clusters[ci].member_ids) {
            meas.vp_obs.push_back({bundle.frame_id, id, clusters.clusters[ci].p_v, true});
        }
    }

    if (accuracy_log != nullptr) {
        // majority-vote map from cluster to true direction class
        std::map<int, std::map<int, int>> votes;
        for (const Segment2D& seg : bundle.segments) {
            const auto assoc = bundle.associations.find(seg.id);
            if (assoc == bundle.associations.end() || assoc->second < 0) continue;
            const int cls = classes.count(assoc->second) ? classes.at(assoc->second) : -1;
            if (cls < 0) continue;
            const auto it = assigned_cluster.find(seg.id);
            if (it != assigned_cluster.end()) votes[it->second][cls]++;
        }
        std::map<int, int> cluster_to_class;
        for (const auto& [ci, per_class] : votes) {
            int best_class = -1, best = 0;
            for (const auto& [cls, count] : per_class) {
                if (count > best) {
                    best = count;
                    best_class = cls;
                }
            }
            cluster_to_class[ci] = best_class;
        }
        for (const Segment2D& seg : bundle.segments) {
            const auto assoc = bundle.associations.find(seg.id);
            if (assoc == bundle.associations.end() || assoc->second < 0) continue;
            const int cls = classes.count(assoc->second) ? classes.at(assoc->second) : -1;
            if (cls < 0) continue;
            ++total;
            const auto it = assigned_cluster.find(seg.id);
            if (it != assigned_cluster.end() && cluster_to_class[it->second] == cls) ++correct;
        }
        if (total > 0) accuracy_log->push_back(static_cast<double>(correct) / total);
    }
    return meas;
}

namespace {

struct TrackBook {
    std::int64_t latest_frame = -1;
    Segment2D latest_seg;
    bool latest_has_vp = false;
    Eigen::Vector2d latest_vp = Eigen::Vector2d::Zero();
};

SolveOptions solver_options(const ExperimentConfig& config, bool use_vp) {
    SolveOptions opts = config.solver;
    opts.use_vp_factors = use_vp;
    return opts;
}

// Per-frame observability report for one line at a given pose/line state.
void fill_line_fim(LineResult& lr, const OrthonormalLine& O_world, const CameraPose& pose,
                   const TrackBook& book, const SolveOptions& opts) {
    try {
        const PluckerLine L_c = transform_line(to_plucker(O_world, Frame::world), pose);
        LineFrameObservation obs;
        obs.line_in_camera = to_orthonormal(L_c);
        obs.segment = book.latest_seg;
        if (book.latest_has_vp) obs.vp = book.latest_vp;
        const Eigen::Matrix2d Omega_l =
            Eigen::Matrix2d::Identity() / (opts.sigma_line * opts.sigma_line);
        const Eigen::Matrix2d Omega_v =
            Eigen::Matrix2d::Identity() / (opts.sigma_vp * opts.sigma_vp);
        const FimReport rep = analyze_line(obs, Omega_l, Omega_v);
        lr.rank_line = rep.rank_line;
        lr.rank_vp = rep.rank_vp;
        lr.rank_total = rep.rank_total;
        lr.slope_degenerate = rep.slope_degenerate;
    } catch (const Error&) {
        lr.rank_line = lr.rank_vp = lr.rank_total = -1;
    }
}

}  // namespace

SolveRunResult run_solve(const Dataset& dataset, const ExperimentConfig& config) {
    SolveRunResult result;
    result.seed = dataset.seed;
    result.vp_factors = config.use_vp_factors;

    if (dataset.bundles.size() < 2) {
        throw PreconditionError("dataset needs at least two frames");
    }
    const SolveOptions opts = solver_options(config, config.use_vp_factors);
    std::vector<double> accuracy_log;
    std::vector<double>* acc =
        config.vp_source == VpSource::jlinkage ? &accuracy_log : nullptr;

    const int I = std::min<int>(config.window_size, static_cast<int>(dataset.bundles.size()));

    WindowState window;
    MeasurementSet meas;
    for (int i = 0; i < I; ++i) {
        const FrameBundle& b = dataset.bundles[i];
        window.poses.push_back({b.frame_id, b.true_pose, false});
        const MeasurementSet m = measurements_for_frame(dataset, b, config, acc);
        meas.line_obs.insert(meas.line_obs.end(), m.line_obs.begin(), m.line_obs.end());
        meas.vp_obs.insert(meas.vp_obs.end(), m.vp_obs.begin(), m.vp_obs.end());
    }
    window = fix_gauge(std::move(window));

    std::map<std::int64_t, bool> degenerate_init;
    std::map<std::int64_t, TrackBook> books;
    std::map<std::int64_t, CameraPose> final_pose;   // last estimate per frame
    std::map<std::int64_t, LineState> final_lines;   // retired + final window lines

    auto update_books = [&](const MeasurementSet& m) {
        std::set<std::pair<std::int64_t, std::int64_t>> vp_keys;
        for (const VpObsEntry& e : m.vp_obs) vp_keys.insert({e.frame_id, e.track_id});
        for (const LineObsEntry& e : m.line_obs) {
            TrackBook& book = books[e.track_id];
            if (e.frame_id >= book.latest_frame) {
                book.latest_frame = e.frame_id;
                book.latest_seg = e.seg;
                book.latest_has_vp = false;
            }
        }
        for (const VpObsEntry& e : m.vp_obs) {
            TrackBook& book = books[e.track_id];
            if (e.frame_id == book.latest_frame) {
                book.latest_has_vp = true;
                book.latest_vp = e.p_v;
            }
        }
    };
    update_books(meas);

    auto run_window = [&]() {
        InitReport init = initialize_lines(window, meas, opts);
        for (std::int64_t t : init.degenerate) degenerate_init[t] = true;
        const Problem problem = build_problem(window, meas, opts);
        auto [solved, stats] = optimize(problem);
        window = std::move(solved);
        result.window_stats.push_back(std::move(stats));
    };

    run_window();

    for (size_t next = I; next < dataset.bundles.size(); ++next) {
        const FrameBundle& b = dataset.bundles[next];
        const MeasurementSet new_meas = measurements_for_frame(dataset, b, config, acc);
        update_books(new_meas);

        final_pose[window.poses.front().frame_id] = window.poses.front().pose;
        SlideResult slid = slide_window(std::move(window), std::move(meas),
                                        {b.frame_id, b.true_pose, false}, new_meas);
        window = std::move(slid.window);
        meas = std::move(slid.meas);
        for (auto& [track, state] : slid.retired) final_lines[track] = state;
        window = fix_gauge(std::move(window));
        run_window();
    }

    for (const FramePose& f : window.poses) final_pose[f.frame_id] = f.pose;
    for (const auto& [track, state] : window.lines) final_lines[track] = state;

    // pose RMSE against ground truth
    double sq_sum = 0.0;
    int n_pose = 0;
    for (const FrameBundle& b : dataset.bundles) {
        const auto it = final_pose.find(b.frame_id);
        if (it == final_pose.end()) continue;
        sq_sum += (it->second.p - b.true_pose.p).squaredNorm();
        ++n_pose;
    }
    result.pose_rmse = n_pose > 0 ? std::sqrt(sq_sum / n_pose) : 0.0;
    result.final_cost = result.window_stats.empty() ? 0.0 : result.window_stats.back().final_cost;

    // per-line metrics and observability at the solution
    const auto classes = line_classes(dataset);
    std::map<std::int64_t, const SceneLine*> truth;
    for (const SceneLine& sl : dataset.scene) truth[sl.id] = &sl;

    std::vector<double> dir_errors, dist_errors;
    for (const auto& [track, state] : final_lines) {
        const auto t = truth.find(track);
        if (t == truth.end()) continue;  // outlier segments have no 3D line
        LineResult lr;
        lr.track_id = track;
        lr.direction_class = classes.count(track) ? classes.at(track) : -1;
        lr.degenerate_init = degenerate_init.count(track) > 0;

        PluckerLine est;
        try {
            est = to_plucker(state.O, Frame::world);
        } catch (const Error&) {
            continue;
        }
        const LineMetrics m = line_error(est, t->second->line);
        lr.direction_error = m.direction_error;
        lr.distance_error = m.orthogonal_distance_error;

        const TrackBook& book = books.at(track);
        lr.had_vp = config.use_vp_factors && book.latest_has_vp;
        const auto pose_it = final_pose.find(book.latest_frame);
        if (pose_it != final_pose.end()) {
            TrackBook effective = book;
            effective.latest_has_vp = lr.had_vp;
            fill_line_fim(lr, state.O, pose_it->second, effective, opts);
        }
        dir_errors.push_back(lr.direction_error);
        dist_errors.push_back(lr.distance_error);
        result.lines.push_back(lr);
    }
    result.median_direction_error = median(dir_errors);
    result.median_distance_error = median(dist_errors);
    if (acc != nullptr && !accuracy_log.empty()) {
        double sum = 0;
        for (double a : accuracy_log) sum += a;
        result.clustering_accuracy = sum / accuracy_log.size();
    }
    return result;
}

AbReport run_ab_degeneracy(const ExperimentConfig& config) {
    if (config.trajectory.kind != TrajectoryKind::pure_translation) {
        throw ConfigError("ab-degeneracy requires a pure_translation trajectory");
    }
    AbReport report;
    std::vector<double> with_errors, without_errors;
    int with_rank4 = 0, with_total = 0;
    int without_le2 = 0, without_total = 0;

    for (std::uint64_t seed : config.seeds) {
        const Dataset dataset = simulate_dataset(config, seed);

        ExperimentConfig with_cfg = config;
        with_cfg.use_vp_factors = true;
        with_cfg.solver.fail_on_singular = false;
        ExperimentConfig without_cfg = with_cfg;
        without_cfg.use_vp_factors = false;

        AbSeedResult seed_result;
        seed_result.seed = seed;
        seed_result.with_vp = run_solve(dataset, with_cfg);
        seed_result.without_vp = run_solve(dataset, without_cfg);

        for (const LineResult& lr : seed_result.with_vp.lines) {
            with_errors.push_back(lr.direction_error);
            if (lr.had_vp) {
                ++with_total;
                if (lr.rank_total == 4) ++with_rank4;
            }
        }
        for (const LineResult& lr : seed_result.without_vp.lines) {
            without_errors.push_back(lr.direction_error);
            ++without_total;
            if (lr.rank_total >= 0 && lr.rank_total <= 2) ++without_le2;
        }
        report.per_seed.push_back(std::move(seed_result));
    }

    report.with_median_direction_error = median(with_errors);
    report.without_median_direction_error = median(without_errors);
    report.improvement_ratio =
        report.with_median_direction_error > 0
            ? report.without_median_direction_error / report.with_median_direction_error
            : 0.0;
    report.with_rank4_fraction = with_total > 0 ? static_cast<double>(with_rank4) / with_total : 0;
    report.without_rank_le2_fraction =
        without_total > 0 ? static_cast<double>(without_le2) / without_total : 0;
    return report;
}

FimAudit run_fim(const Dataset& dataset, const ExperimentConfig& config) {
    FimAudit audit;
    const auto classes = line_classes(dataset);

    // latest observation of each line, with its vanishing point if any
    std::map<std::int64_t, std::pair<const FrameBundle*, Segment2D>> latest;
    for (const FrameBundle& b : dataset.bundles) {
        for (const Segment2D& seg : b.segments) {
            const auto assoc = b.associations.find(seg.id);
            if (assoc == b.associations.end() || assoc->second < 0) continue;
            latest[assoc->second] = {&b, seg};
        }
    }

    std::map<std::int64_t, const SceneLine*> truth;
    for (const SceneLine& sl : dataset.scene) truth[sl.id] = &sl;

    const Eigen::Matrix2d Omega_l =
        Eigen::Matrix2d::Identity() / (config.solver.sigma_line * config.solver.sigma_line);
    const Eigen::Matrix2d Omega_v =
        Eigen::Matrix2d::Identity() / (config.solver.sigma_vp * config.solver.sigma_vp);

    for (const auto& [line_id, obs] : latest) {
        const auto t = truth.find(line_id);
        if (t == truth.end()) continue;
        const FrameBundle& bundle = *obs.first;

        FimLineEntry entry;
        entry.track_id = line_id;
        entry.direction_class = classes.count(line_id) ? classes.at(line_id) : -1;

        LineFrameObservation lfo;
        try {
            lfo.line_in_camera =
                to_orthonormal(transform_line(t->second->line, bundle.true_pose));
        } catch (const Error&) {
            continue;
        }
        lfo.segment = obs.second;
        if (entry.direction_class >= 0) {
            const auto vp = bundle.vp_truth.find(entry.direction_class);
            if (vp != bundle.vp_truth.end()) {
                lfo.vp = vp->second;
                entry.had_vp = true;
            }
        }
        entry.report = analyze_line(lfo, Omega_l, Omega_v);

        if (entry.had_vp && entry.report.rank_total == 4) ++audit.count_rank4;
        if (entry.had_vp && entry.report.rank_total == 3) ++audit.count_rank3;
        if (!entry.had_vp && entry.report.rank_total <= 2) ++audit.count_rank_le2;
        if (entry.report.slope_degenerate) ++audit.count_slope_degenerate;
        audit.lines.push_back(std::move(entry));
    }
    return audit;
}

}  // namespace linemap
