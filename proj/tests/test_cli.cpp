#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "linemap/cli.hpp"
#include "linemap/dataset_io.hpp"
#include "support/pencil_scene.hpp"

using namespace linemap;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("linemap_cli_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = "") const {
        return sub.empty() ? path.string() : (path / sub).string();
    }
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

std::string base_config(int frames, double noise_px, const std::string& extra = "") {
    std::ostringstream o;
    o << R"({
  "scene": {"lines_per_direction": 3, "unstructured_lines": 1},
  "trajectory": {"kind": "orbit", "frame_count": )"
      << frames << R"(, "step_size": 0.25},
  "noise_sigma_px": )"
      << noise_px << R"(,
  "window_size": 4,
  "seeds": [3])"
      << extra << "\n}\n";
    return o.str();
}

}  // namespace

TEST_CASE("simulate writes parseable, reproducible datasets") {
    TempDir tmp("simulate");
    const std::string cfg = tmp.str("config.json");
    write_file(cfg, base_config(5, 1.0));

    const int rc = cli::run({"simulate", "--config", cfg, "--out", tmp.str("a")});
    REQUIRE(rc == cli::kExitOk);
    const std::string dataset_a = tmp.str("a/dataset_seed3.jsonl");
    REQUIRE(fs::exists(dataset_a));
    const Dataset ds = read_dataset(dataset_a);
    CHECK(ds.seed == 3);
    CHECK(ds.bundles.size() == 5);

    SUBCASE("byte-identical across repeated runs") {
        REQUIRE(cli::run({"simulate", "--config", cfg, "--out", tmp.str("b")}) == cli::kExitOk);
        CHECK(read_file(dataset_a) == read_file(tmp.str("b/dataset_seed3.jsonl")));
        CHECK(file_content_hash(dataset_a) ==
              file_content_hash(tmp.str("b/dataset_seed3.jsonl")));
    }
    SUBCASE("unwritable output directory fails with a data error") {
        write_file(tmp.str("file_in_the_way"), "x");
        CHECK(cli::run({"simulate", "--config", cfg, "--out", tmp.str("file_in_the_way")}) ==
              cli::kExitData);
    }
    SUBCASE("built-in defaults need no config file") {
        REQUIRE(cli::run({"simulate", "--out", tmp.str("defaults")}) == cli::kExitOk);
        const Dataset def = read_dataset(tmp.str("defaults/dataset_seed1.jsonl"));
        CHECK(def.bundles.size() > 0);
    }
}

TEST_CASE("solver failures surface as exit code 4") {
    TempDir tmp("solverfail");
    const std::string cfg = tmp.str("config.json");
    write_file(cfg, R"({
  "scene": {
    "structural_directions": [[1,0,0]],
    "lines_per_direction": 5,
    "unstructured_lines": 0,
    "box_center": [0.9, 0.0, 3.0],
    "box_half_extents": [1.2, 0.8, 0.8]
  },
  "trajectory": {
    "kind": "pure_translation",
    "frame_count": 5,
    "step_size": 0.15,
    "start": [-0.4, 0.0, 0.0],
    "translation_direction": [1, 0, 0],
    "target": [0.9, 0.0, 3.0]
  },
  "noise_sigma_px": 0.0,
  "window_size": 5,
  "seeds": [2]
})");
    REQUIRE(cli::run({"simulate", "--config", cfg, "--out", tmp.str()}) == cli::kExitOk);
    // line-only factors on epipolar-plane lines: rank-deficient normal
    // equations, surfaced by default
    CHECK(cli::run({"solve", "--config", cfg, "--dataset", tmp.str("dataset_seed2.jsonl"),
                    "--no-vp", "--out", tmp.str()}) == cli::kExitSolver);
}

TEST_CASE("solve emits results and plot data") {
    TempDir tmp("solve");
    const std::string cfg = tmp.str("config.json");
    write_file(cfg, base_config(6, 0.0));

    REQUIRE(cli::run({"simulate", "--config", cfg, "--out", tmp.str()}) == cli::kExitOk);
    const std::string dataset = tmp.str("dataset_seed3.jsonl");
    REQUIRE(cli::run({"solve", "--config", cfg, "--dataset", dataset, "--out", tmp.str()}) ==
            cli::kExitOk);

    const json results = json::parse(read_file(tmp.str("solve_results.json")));
    CHECK(results.at("schema_version") == 1);
    CHECK(results.at("config").at("window_size") == 4);
    REQUIRE(results.at("runs").size() == 1);
    const json& run0 = results.at("runs").at(0);
    CHECK(run0.at("seed") == 3);
    CHECK(run0.at("dataset_hash") == file_content_hash(dataset));
    CHECK(run0.at("final_cost").get<double>() < 1e-12);
    CHECK(run0.at("vp_factors") == true);

    const std::string csv = read_file(tmp.str("solve_lines.csv"));
    CHECK(csv.find("seed,arm,track_id") == 0);
    CHECK(csv.find("with_vp") != std::string::npos);

    SUBCASE("--no-vp is honored and recorded") {
        REQUIRE(cli::run({"solve", "--config", cfg, "--dataset", dataset, "--no-vp", "--out",
                          tmp.str("novp")}) == cli::kExitOk);
        const json novp = json::parse(read_file(tmp.str("novp/solve_results.json")));
        CHECK(novp.at("config").at("use_vp_factors") == false);
        CHECK(novp.at("runs").at(0).at("vp_factors") == false);
    }
    SUBCASE("repeated solves agree numerically") {
        REQUIRE(cli::run({"solve", "--config", cfg, "--dataset", dataset, "--out",
                          tmp.str("again")}) == cli::kExitOk);
        const json again = json::parse(read_file(tmp.str("again/solve_results.json")));
        const double a = results.at("runs").at(0).at("median_direction_error_rad");
        const double b = again.at("runs").at(0).at("median_direction_error_rad");
        CHECK(std::abs(a - b) < 1e-12);
    }
}

TEST_CASE("solve aggregates multiple seeds") {
    TempDir tmp("multiseed");
    const std::string cfg = tmp.str("config.json");
    write_file(cfg, base_config(5, 0.5, R"(,
  "out_dir": "unused")"));
    // override seeds via two simulate runs
    REQUIRE(cli::run({"simulate", "--config", cfg, "--seed", "4", "--out", tmp.str()}) ==
            cli::kExitOk);
    REQUIRE(cli::run({"simulate", "--config", cfg, "--seed", "5", "--out", tmp.str()}) ==
            cli::kExitOk);
    REQUIRE(cli::run({"solve", "--config", cfg, "--dataset", tmp.str("dataset_seed4.jsonl"),
                      "--dataset", tmp.str("dataset_seed5.jsonl"), "--out", tmp.str()}) ==
            cli::kExitOk);
    const json results = json::parse(read_file(tmp.str("solve_results.json")));
    CHECK(results.at("runs").size() == 2);
    CHECK(results.at("aggregate").contains("median_direction_error_rad"));
}

TEST_CASE("fim audit separates observable and unobservable lines") {
    TempDir tmp("fim");
    const std::string cfg = tmp.str("config.json");
    write_file(cfg, base_config(5, 1.0));

    REQUIRE(cli::run({"simulate", "--config", cfg, "--out", tmp.str()}) == cli::kExitOk);
    REQUIRE(cli::run({"fim", "--config", cfg, "--dataset", tmp.str("dataset_seed3.jsonl"),
                      "--out", tmp.str()}) == cli::kExitOk);

    const json audit = json::parse(read_file(tmp.str("fim_audit.json")));
    const json& summary = audit.at("summary");
    CHECK(summary.at("count_lines").get<int>() > 0);
    // structural lines carry vanishing points: the direction becomes
    // observable and only the in-plane depth slide stays blind (rank 3);
    // lines without a vanishing point stay at rank <= 2
    CHECK(summary.at("count_rank3").get<int>() > 0);
    CHECK(summary.at("count_rank_le2").get<int>() > 0);
    for (const json& line : audit.at("lines")) {
        if (line.at("had_vp") == true) {
            CHECK(line.at("fim").at("rank_total") == 3);
        } else {
            CHECK(line.at("fim").at("rank_total").get<int>() <= 2);
        }
    }
}

TEST_CASE("cluster command scores labeled pencils") {
    TempDir tmp("cluster");
    std::mt19937_64 rng(55);
    const testing::PencilScene scene = testing::make_pencil_scene(
        rng, {{0.9, 0.1}, {-0.8, 0.4}, {0.05, -0.9}}, 10, 1.0 / 460.0, 3);

    json segs = json::array();
    for (const Segment2D& s : scene.segments) {
        json rec{{"id", s.id},
                 {"p_s", {s.p_s.x(), s.p_s.y()}},
                 {"p_e", {s.p_e.x(), s.p_e.y()}}};
        rec["label"] = scene.labels.at(s.id);
        segs.push_back(std::move(rec));
    }
    write_file(tmp.str("segments.json"),
               json{{"schema_version", 1}, {"segments", segs}}.dump());

    REQUIRE(cli::run({"cluster", "--segments", tmp.str("segments.json"), "--seed", "7", "--out",
                      tmp.str()}) == cli::kExitOk);
    const json out = json::parse(read_file(tmp.str("clusters.json")));
    CHECK(out.at("accuracy").get<double>() >= 0.95);
    CHECK(out.at("clusters").size() >= 3);

    SUBCASE("unlabeled input omits the accuracy field") {
        json plain = json::array();
        for (const Segment2D& s : scene.segments) {
            plain.push_back(json{{"id", s.id},
                                 {"p_s", {s.p_s.x(), s.p_s.y()}},
                                 {"p_e", {s.p_e.x(), s.p_e.y()}}});
        }
        write_file(tmp.str("plain.json"), json{{"segments", plain}}.dump());
        REQUIRE(cli::run({"cluster", "--segments", tmp.str("plain.json"), "--out",
                          tmp.str("plain_out")}) == cli::kExitOk);
        const json res = json::parse(read_file(tmp.str("plain_out/clusters.json")));
        CHECK_FALSE(res.contains("accuracy"));
    }
    SUBCASE("empty input is a data error") {
        write_file(tmp.str("empty.json"), R"({"segments": []})");
        CHECK(cli::run({"cluster", "--segments", tmp.str("empty.json"), "--out",
                        tmp.str("e")}) == cli::kExitData);
    }
}

TEST_CASE("config errors exit with code 2") {
    TempDir tmp("badconfig");
    write_file(tmp.str("bad.json"), R"({"vp_source": "psychic"})");
    CHECK(cli::run({"simulate", "--config", tmp.str("bad.json"), "--out", tmp.str()}) ==
          cli::kExitConfig);

    write_file(tmp.str("empty_seeds.json"), R"({"seeds": []})");
    CHECK(cli::run({"simulate", "--config", tmp.str("empty_seeds.json"), "--out", tmp.str()}) ==
          cli::kExitConfig);

    CHECK(cli::run({"simulate", "--config", tmp.str("missing.json"), "--out", tmp.str()}) ==
          cli::kExitConfig);
}

TEST_CASE("ab-degeneracy rejects non-translation trajectories") {
    TempDir tmp("abreject");
    write_file(tmp.str("orbit.json"), base_config(5, 1.0));
    CHECK(cli::run({"ab-degeneracy", "--config", tmp.str("orbit.json"), "--out", tmp.str()}) ==
          cli::kExitConfig);
}

TEST_CASE("ab-degeneracy produces a paired report") {
    TempDir tmp("ab");
    const std::string cfg = R"({
  "scene": {
    "structural_directions": [[1,0,0]],
    "lines_per_direction": 8,
    "unstructured_lines": 0,
    "box_center": [0.9, 0.0, 3.0],
    "box_half_extents": [1.2, 0.8, 0.8]
  },
  "trajectory": {
    "kind": "pure_translation",
    "frame_count": 6,
    "step_size": 0.16,
    "start": [-0.5, 0.0, 0.0],
    "translation_direction": [1, 0, 0],
    "target": [0.9, 0.0, 3.0]
  },
  "noise_sigma_px": 1.0,
  "window_size": 6,
  "seeds": [11, 12],
  "solver": {"vp_loss": {"kind": "arctan", "scale": 2000.0}, "max_iterations": 100}
})";
    write_file(tmp.str("ab.json"), cfg);
    REQUIRE(cli::run({"ab-degeneracy", "--config", tmp.str("ab.json"), "--out", tmp.str()}) ==
            cli::kExitOk);
    const json report = json::parse(read_file(tmp.str("ab_report.json")));
    CHECK(report.at("per_seed").size() == 2);
    const json& pooled = report.at("pooled");
    CHECK(pooled.at("with_median_direction_error_rad").get<double>() <
          pooled.at("without_median_direction_error_rad").get<double>());
    CHECK(fs::exists(tmp.str("ab_lines.csv")));

    SUBCASE("j-linkage vanishing point source completes and logs accuracy") {
        REQUIRE(cli::run({"ab-degeneracy", "--config", tmp.str("ab.json"), "--seed", "11",
                          "--vp-source", "jlinkage", "--out", tmp.str("jl")}) == cli::kExitOk);
        const json jl = json::parse(read_file(tmp.str("jl/ab_report.json")));
        const json& with_vp = jl.at("per_seed").at(0).at("with_vp");
        CHECK(with_vp.at("clustering_accuracy").get<double>() > 0.8);
        const json& jl_pooled = jl.at("pooled");
        CHECK(jl_pooled.at("with_median_direction_error_rad").get<double>() <
              jl_pooled.at("without_median_direction_error_rad").get<double>());
    }
}
