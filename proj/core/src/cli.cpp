#include "linemap/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "linemap/dataset_io.hpp"
#include "linemap/experiments.hpp"

namespace linemap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;           // override
    std::int64_t seed = -1;        // override (single seed)
    bool no_vp = false;
    std::string vp_source;         // override: truth | jlinkage
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path,
                    "experiment config JSON (built-in defaults when omitted)");
    cmd->add_option("--out", flags.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", flags.seed, "single seed (overrides config seeds)");
    cmd->add_flag("--no-vp", flags.no_vp, "disable vanishing point factors");
    cmd->add_option("--vp-source", flags.vp_source, "vanishing point source: truth|jlinkage")
        ->check(CLI::IsMember({"truth", "jlinkage"}));
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
    ExperimentConfig config = flags.config_path.empty()
                                  ? ExperimentConfig{}
                                  : load_experiment_config(flags.config_path);
    if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
    if (flags.seed >= 0) config.seeds = {static_cast<std::uint64_t>(flags.seed)};
    if (flags.no_vp) config.use_vp_factors = false;
    if (flags.vp_source == "truth") config.vp_source = VpSource::truth;
    if (flags.vp_source == "jlinkage") config.vp_source = VpSource::jlinkage;
    return config;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory: " + dir);
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << text;
    if (!f) throw IoError("write failed: " + path);
}

std::string dataset_path(const ExperimentConfig& config, std::uint64_t seed) {
    return config.out_dir + "/dataset_seed" + std::to_string(seed) + ".jsonl";
}

json stats_to_json(const SolveStats& s) {
    return json{{"iterations", s.iterations},
                {"accepted_steps", s.accepted_steps},
                {"rejected_steps", s.rejected_steps},
                {"initial_cost", s.initial_cost},
                {"final_cost", s.final_cost},
                {"termination_reason", to_string(s.termination_reason)},
                {"cost_trace", s.cost_trace},
                {"final_gradient_inf", s.final_gradient_inf},
                {"singular_variable_ids", s.singular_variable_ids}};
}

json line_result_to_json(const LineResult& lr) {
    return json{{"track_id", lr.track_id},
                {"direction_class", lr.direction_class},
                {"degenerate_init", lr.degenerate_init},
                {"had_vp", lr.had_vp},
                {"direction_error_rad", lr.direction_error},
                {"direction_error_deg", lr.direction_error * 180.0 / M_PI},
                {"distance_error_m", lr.distance_error},
                {"rank_line", lr.rank_line},
                {"rank_vp", lr.rank_vp},
                {"rank_total", lr.rank_total},
                {"slope_degenerate", lr.slope_degenerate}};
}

json run_result_to_json(const SolveRunResult& r) {
    json lines = json::array();
    for (const LineResult& lr : r.lines) lines.push_back(line_result_to_json(lr));
    json stats = json::array();
    for (const SolveStats& s : r.window_stats) stats.push_back(stats_to_json(s));
    json out{{"seed", r.seed},
             {"vp_factors", r.vp_factors},
             {"pose_rmse", r.pose_rmse},
             {"final_cost", r.final_cost},
             {"median_direction_error_rad", r.median_direction_error},
             {"median_distance_error_m", r.median_distance_error},
             {"window_stats", stats},
             {"lines", lines}};
    if (r.clustering_accuracy.has_value()) {
        out["clustering_accuracy"] = *r.clustering_accuracy;
    }
    return out;
}

void append_line_csv(std::ostringstream& csv, std::uint64_t seed, const std::string& arm,
                     const LineResult& lr) {
    csv << seed << "," << arm << "," << lr.track_id << "," << lr.direction_class << ","
        << (lr.degenerate_init ? 1 : 0) << "," << (lr.had_vp ? 1 : 0) << ","
        << format_double(lr.direction_error) << ","
        << format_double(lr.direction_error * 180.0 / M_PI) << ","
        << format_double(lr.distance_error) << "," << lr.rank_line << "," << lr.rank_vp << ","
        << lr.rank_total << "," << (lr.slope_degenerate ? 1 : 0) << "\n";
}

const char* kLineCsvHeader =
    "seed,arm,track_id,direction_class,degenerate_init,had_vp,direction_error_rad,"
    "direction_error_deg,distance_error_m,rank_line,rank_vp,rank_total,slope_degenerate\n";

int cmd_simulate(const CommonFlags& flags) {
    const ExperimentConfig config = resolve_config(flags);
    ensure_out_dir(config.out_dir);
    for (std::uint64_t seed : config.seeds) {
        const Dataset ds = simulate_dataset(config, seed);
        const std::string path = dataset_path(config, seed);
        emit_dataset(ds, path);
        std::cout << path << "\n";
    }
    return kExitOk;
}

int cmd_solve(const CommonFlags& flags, const std::vector<std::string>& dataset_paths) {
    const ExperimentConfig config = resolve_config(flags);
    ensure_out_dir(config.out_dir);

    json per_seed = json::array();
    std::ostringstream csv;
    csv << kLineCsvHeader;
    std::vector<double> medians_dir, medians_dist;

    for (const std::string& path : dataset_paths) {
        const Dataset ds = read_dataset(path);
        const SolveRunResult r = run_solve(ds, config);
        json rec = run_result_to_json(r);
        rec["dataset"] = path;
        rec["dataset_hash"] = file_content_hash(path);
        per_seed.push_back(std::move(rec));
        medians_dir.push_back(r.median_direction_error);
        medians_dist.push_back(r.median_distance_error);
        const std::string arm = config.use_vp_factors ? "with_vp" : "without_vp";
        for (const LineResult& lr : r.lines) append_line_csv(csv, r.seed, arm, lr);
    }

    json out{{"schema_version", 1},
             {"config", json::parse(experiment_config_to_json(config))},
             {"runs", per_seed},
             {"aggregate",
              {{"median_direction_error_rad", median(medians_dir)},
               {"median_distance_error_m", median(medians_dist)}}}};
    write_text(config.out_dir + "/solve_results.json", out.dump(2) + "\n");
    write_text(config.out_dir + "/solve_lines.csv", csv.str());
    std::cout << config.out_dir << "/solve_results.json\n";
    return kExitOk;
}

int cmd_ab(const CommonFlags& flags) {
    const ExperimentConfig config = resolve_config(flags);
    ensure_out_dir(config.out_dir);
    const AbReport report = run_ab_degeneracy(config);

    json per_seed = json::array();
    std::ostringstream csv;
    csv << kLineCsvHeader;
    for (const AbSeedResult& sr : report.per_seed) {
        per_seed.push_back(json{{"seed", sr.seed},
                                {"with_vp", run_result_to_json(sr.with_vp)},
                                {"without_vp", run_result_to_json(sr.without_vp)}});
        for (const LineResult& lr : sr.with_vp.lines) append_line_csv(csv, sr.seed, "with_vp", lr);
        for (const LineResult& lr : sr.without_vp.lines) {
            append_line_csv(csv, sr.seed, "without_vp", lr);
        }
    }
    json out{{"schema_version", 1},
             {"config", json::parse(experiment_config_to_json(config))},
             {"per_seed", per_seed},
             {"pooled",
              {{"with_median_direction_error_rad", report.with_median_direction_error},
               {"with_median_direction_error_deg",
                report.with_median_direction_error * 180.0 / M_PI},
               {"without_median_direction_error_rad", report.without_median_direction_error},
               {"without_median_direction_error_deg",
                report.without_median_direction_error * 180.0 / M_PI},
               {"improvement_ratio", report.improvement_ratio},
               {"with_rank4_fraction", report.with_rank4_fraction},
               {"without_rank_le2_fraction", report.without_rank_le2_fraction}}}};
    write_text(config.out_dir + "/ab_report.json", out.dump(2) + "\n");
    write_text(config.out_dir + "/ab_lines.csv", csv.str());
    std::cout << config.out_dir << "/ab_report.json\n";
    return kExitOk;
}

json fim_report_to_json(const FimReport& rep) {
    auto mat = [](const Eigen::Matrix4d& H) {
        json rows = json::array();
        for (int r = 0; r < 4; ++r) {
            json row = json::array();
            for (int c = 0; c < 4; ++c) row.push_back(H(r, c));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    auto sv = [](const Eigen::Vector4d& s) { return json{s[0], s[1], s[2], s[3]}; };
    return json{{"H_line", mat(rep.H_line)},
                {"H_vp", mat(rep.H_vp)},
                {"H_total", mat(rep.H_total)},
                {"rank_line", rep.rank_line},
                {"rank_vp", rep.rank_vp},
                {"rank_total", rep.rank_total},
                {"singular_values",
                 {{"H_line", sv(rep.singular_values[0])},
                  {"H_vp", sv(rep.singular_values[1])},
                  {"H_total", sv(rep.singular_values[2])}}},
                {"slope_degenerate", rep.slope_degenerate}};
}

int cmd_fim(const CommonFlags& flags, const std::string& dataset_file) {
    const ExperimentConfig config = resolve_config(flags);
    ensure_out_dir(config.out_dir);
    const Dataset ds = read_dataset(dataset_file);
    const FimAudit audit = run_fim(ds, config);

    json lines = json::array();
    for (const FimLineEntry& e : audit.lines) {
        lines.push_back(json{{"track_id", e.track_id},
                             {"direction_class", e.direction_class},
                             {"had_vp", e.had_vp},
                             {"fim", fim_report_to_json(e.report)}});
    }
    json out{{"schema_version", 1},
             {"config", json::parse(experiment_config_to_json(config))},
             {"dataset", dataset_file},
             {"dataset_hash", file_content_hash(dataset_file)},
             {"summary",
              {{"count_rank4", audit.count_rank4},
               {"count_rank3", audit.count_rank3},
               {"count_rank_le2", audit.count_rank_le2},
               {"count_slope_degenerate", audit.count_slope_degenerate},
               {"count_lines", static_cast<int>(audit.lines.size())}}},
             {"lines", lines}};
    write_text(config.out_dir + "/fim_audit.json", out.dump(2) + "\n");
    std::cout << config.out_dir << "/fim_audit.json\n";
    return kExitOk;
}

int cmd_cluster(const CommonFlags& flags, const std::string& segments_file) {
    const ExperimentConfig config = resolve_config(flags);
    ensure_out_dir(config.out_dir);

    std::ifstream f(segments_file);
    if (!f) throw IoError("cannot open segments file: " + segments_file);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed segments file: ") + e.what());
    }

    std::vector<Segment2D> segments;
    std::map<std::int64_t, int> labels;
    bool have_labels = false;
    for (const json& s : j.at("segments")) {
        Segment2D seg;
        seg.id = s.at("id");
        seg.p_s = Eigen::Vector2d(s.at("p_s").at(0), s.at("p_s").at(1));
        seg.p_e = Eigen::Vector2d(s.at("p_e").at(0), s.at("p_e").at(1));
        segments.push_back(seg);
        if (s.contains("label")) {
            labels[seg.id] = s.at("label");
            have_labels = true;
        }
    }
    if (segments.empty()) {
        throw PreconditionError(
            "segments file holds no segments; expected {\"segments\":[{id,p_s,p_e},...]}");
    }

    JLinkageParams params = config.jlinkage;
    if (flags.seed >= 0) params.rng_seed = static_cast<std::uint64_t>(flags.seed);
    const ClusterResult result = jlinkage_cluster(segments, params);

    json clusters = json::array();
    for (const VanishingPointObservation& c : result.clusters) {
        clusters.push_back(json{{"p_v", {c.p_v.x(), c.p_v.y()}},
                                {"is_finite", c.is_finite},
                                {"v", {c.v.x(), c.v.y(), c.v.z()}},
                                {"member_ids", c.member_ids}});
    }
    json out{{"schema_version", 1},
             {"segments_file", segments_file},
             {"segments_hash", file_content_hash(segments_file)},
             {"params",
              {{"num_hypotheses", params.num_hypotheses},
               {"consensus_threshold", params.consensus_threshold},
               {"min_cluster_size", params.min_cluster_size},
               {"rng_seed", params.rng_seed}}},
             {"clusters", clusters},
             {"outlier_ids", result.outlier_ids}};

    if (have_labels) {
        // majority-vote accuracy of labeled segments; negative labels mark
        // known outliers and stay out of the score
        std::map<int, std::map<int, int>> votes;
        std::map<std::int64_t, int> assigned;
        for (size_t ci = 0; ci < result.clusters.size(); ++ci) {
            for (std::int64_t id : result.clusters[ci].member_ids) {
                assigned[id] = static_cast<int>(ci);
                if (labels.count(id) && labels.at(id) >= 0) {
                    votes[static_cast<int>(ci)][labels.at(id)]++;
                }
            }
        }
        std::map<int, int> cluster_label;
        for (const auto& [ci, per] : votes) {
            int best = -1, best_count = 0;
            for (const auto& [label, count] : per) {
                if (count > best_count) {
                    best_count = count;
                    best = label;
                }
            }
            cluster_label[ci] = best;
        }
        int correct = 0, total = 0;
        for (const auto& [id, label] : labels) {
            if (label < 0) continue;
            ++total;
            const auto it = assigned.find(id);
            if (it != assigned.end() && cluster_label[it->second] == label) ++correct;
        }
        out["accuracy"] = total > 0 ? static_cast<double>(correct) / total : 0.0;
    }

    write_text(config.out_dir + "/clusters.json", out.dump(2) + "\n");
    std::cout << config.out_dir << "/clusters.json\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"desk-scale line mapping experiments"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::vector<std::string> dataset_paths;
    std::string dataset_file;
    std::string segments_file;

    CLI::App* simulate = app.add_subcommand("simulate", "generate datasets");
    add_common(simulate, flags);

    CLI::App* solve = app.add_subcommand("solve", "sliding-window estimation over datasets");
    add_common(solve, flags);
    solve->add_option("--dataset", dataset_paths, "dataset file(s)")->required();

    CLI::App* ab = app.add_subcommand("ab-degeneracy", "paired with/without-VP comparison");
    add_common(ab, flags);

    CLI::App* fim = app.add_subcommand("fim", "per-line information audit at ground truth");
    add_common(fim, flags);
    fim->add_option("--dataset", dataset_file, "dataset file")->required();

    CLI::App* cluster = app.add_subcommand("cluster", "cluster segments by vanishing point");
    add_common(cluster, flags);
    cluster->add_option("--segments", segments_file, "segments JSON file")->required();

    std::vector<std::string> argv_like = args;
    std::reverse(argv_like.begin(), argv_like.end());  // CLI11 parses reversed
    try {
        app.parse(argv_like);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(flags);
        if (solve->parsed()) return cmd_solve(flags, dataset_paths);
        if (ab->parsed()) return cmd_ab(flags);
        if (fim->parsed()) return cmd_fim(flags, dataset_file);
        if (cluster->parsed()) return cmd_cluster(flags, segments_file);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const VersionError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const IoError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const PreconditionError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const InconsistentIds& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const SingularNormalEquations& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        for (const std::string& id : e.variable_ids) std::cerr << "  rank-deficient: " << id << "\n";
        return kExitSolver;
    } catch (const Error& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitConfig;
}

}  // namespace linemap::cli
