#include "linemap/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace linemap {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::string fmt_vec(const double* p, int n) {
    std::string out = "[";
    for (int i = 0; i < n; ++i) {
        if (i) out += ",";
        out += format_double(p[i]);
    }
    out += "]";
    return out;
}

std::string fmt3(const Eigen::Vector3d& v) { return fmt_vec(v.data(), 3); }
std::string fmt2(const Eigen::Vector2d& v) { return fmt_vec(v.data(), 2); }

std::string fmt_rot(const Eigen::Matrix3d& R) {
    double row_major[9];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) row_major[3 * r + c] = R(r, c);
    return fmt_vec(row_major, 9);
}

const char* kind_name(TrajectoryKind k) {
    switch (k) {
        case TrajectoryKind::orbit: return "orbit";
        case TrajectoryKind::pure_translation: return "pure_translation";
        case TrajectoryKind::forward_corridor: return "forward_corridor";
    }
    return "orbit";
}

TrajectoryKind kind_from_name(const std::string& s) {
    if (s == "orbit") return TrajectoryKind::orbit;
    if (s == "pure_translation") return TrajectoryKind::pure_translation;
    if (s == "forward_corridor") return TrajectoryKind::forward_corridor;
    throw IoError("unknown trajectory kind: " + s);
}

std::string header_record(const Dataset& ds) {
    std::ostringstream o;
    o << "{\"record\":\"header\",\"schema_version\":" << ds.schema_version
      << ",\"seed\":" << ds.seed;

    o << ",\"scene_spec\":{\"structural_directions\":[";
    for (size_t i = 0; i < ds.scene_spec.structural_directions.size(); ++i) {
        if (i) o << ",";
        o << fmt3(ds.scene_spec.structural_directions[i]);
    }
    o << "],\"lines_per_direction\":" << ds.scene_spec.lines_per_direction
      << ",\"unstructured_lines\":" << ds.scene_spec.unstructured_lines
      << ",\"box_center\":" << fmt3(ds.scene_spec.box_center)
      << ",\"box_half_extents\":" << fmt3(ds.scene_spec.box_half_extents)
      << ",\"rng_seed\":" << ds.scene_spec.rng_seed << "}";

    const TrajectorySpec& t = ds.trajectory_spec;
    o << ",\"trajectory_spec\":{\"kind\":\"" << kind_name(t.kind)
      << "\",\"frame_count\":" << t.frame_count
      << ",\"step_size\":" << format_double(t.step_size) << ",\"look_at\":\""
      << (t.look_at == LookAtRule::scene_center ? "scene_center" : "fixed_forward")
      << "\",\"target\":" << fmt3(t.target) << ",\"start\":" << fmt3(t.start)
      << ",\"translation_direction\":" << fmt3(t.translation_direction)
      << ",\"orbit_radius\":" << format_double(t.orbit_radius)
      << ",\"extrinsic\":{\"R\":" << fmt_rot(t.extrinsic.R) << ",\"p\":" << fmt3(t.extrinsic.p)
      << "}}";

    const RenderOptions& r = ds.render;
    o << ",\"render\":{\"noise_sigma\":" << format_double(r.noise_sigma)
      << ",\"fov\":" << format_double(r.fov) << ",\"seed\":" << r.seed
      << ",\"min_segment_length\":" << format_double(r.min_segment_length)
      << ",\"outlier_rate\":" << format_double(r.outlier_rate)
      << ",\"clip_box_center\":" << fmt3(r.clip_box_center)
      << ",\"clip_box_half_extents\":" << fmt3(r.clip_box_half_extents) << "}";

    o << ",\"lines\":[";
    for (size_t i = 0; i < ds.scene.size(); ++i) {
        const SceneLine& sl = ds.scene[i];
        if (i) o << ",";
        o << "{\"id\":" << sl.id << ",\"n\":" << fmt3(sl.line.n) << ",\"d\":" << fmt3(sl.line.d)
          << ",\"class\":" << sl.direction_class << "}";
    }
    o << "]}";
    return o.str();
}

std::string frame_record(const FrameBundle& b) {
    std::ostringstream o;
    o << "{\"record\":\"frame\",\"frame_id\":" << b.frame_id << ",\"pose\":{\"R\":"
      << fmt_rot(b.true_pose.R) << ",\"p\":" << fmt3(b.true_pose.p) << "}";

    o << ",\"segments\":[";
    for (size_t i = 0; i < b.segments.size(); ++i) {
        const Segment2D& s = b.segments[i];
        if (i) o << ",";
        o << "{\"id\":" << s.id << ",\"p_s\":" << fmt2(s.p_s) << ",\"p_e\":" << fmt2(s.p_e) << "}";
    }
    o << "]";

    o << ",\"vp_truth\":[";
    bool first = true;
    for (const auto& [cls, pv] : b.vp_truth) {
        if (!first) o << ",";
        first = false;
        o << "{\"class\":" << cls << ",\"p_v\":" << fmt2(pv) << "}";
    }
    o << "]";

    o << ",\"associations\":[";
    first = true;
    for (const auto& [sid, lid] : b.associations) {
        if (!first) o << ",";
        first = false;
        o << "[" << sid << "," << lid << "]";
    }
    o << "]";

    o << ",\"degenerate_flags\":[";
    first = true;
    for (const auto& [lid, flag] : b.degenerate_flags) {
        if (!first) o << ",";
        first = false;
        o << "[" << lid << "," << (flag ? 1 : 0) << "]";
    }
    o << "]}";
    return o.str();
}

Eigen::Vector3d parse3(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}
Eigen::Vector2d parse2(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

Eigen::Matrix3d parse_rot(const json& j) {
    Eigen::Matrix3d R;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) R(r, c) = j.at(3 * r + c);
    return R;
}

}  // namespace

void emit_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open for writing: " + path);
    }
    f << header_record(dataset) << "\n";
    for (const FrameBundle& b : dataset.bundles) {
        f << frame_record(b) << "\n";
    }
    if (!f) {
        throw IoError("write failed: " + path);
    }
}

Dataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open for reading: " + path);
    }
    Dataset ds;
    std::string line;
    bool have_header = false;
    RigidTransform extrinsic;

    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError(std::string("malformed dataset record: ") + e.what());
        }
        const std::string record = j.value("record", "");
        if (record == "header") {
            const int version = j.value("schema_version", -1);
            if (version != kDatasetSchemaVersion) {
                throw VersionError("dataset schema_version " + std::to_string(version) +
                                   " is not supported");
            }
            have_header = true;
            ds.schema_version = version;
            ds.seed = j.at("seed").get<std::uint64_t>();

            const json& s = j.at("scene_spec");
            ds.scene_spec.structural_directions.clear();
            for (const json& d : s.at("structural_directions")) {
                ds.scene_spec.structural_directions.push_back(parse3(d));
            }
            ds.scene_spec.lines_per_direction = s.at("lines_per_direction");
            ds.scene_spec.unstructured_lines = s.at("unstructured_lines");
            ds.scene_spec.box_center = parse3(s.at("box_center"));
            ds.scene_spec.box_half_extents = parse3(s.at("box_half_extents"));
            ds.scene_spec.rng_seed = s.at("rng_seed").get<std::uint64_t>();

            const json& t = j.at("trajectory_spec");
            ds.trajectory_spec.kind = kind_from_name(t.at("kind"));
            ds.trajectory_spec.frame_count = t.at("frame_count");
            ds.trajectory_spec.step_size = t.at("step_size");
            ds.trajectory_spec.look_at = t.at("look_at") == "scene_center"
                                             ? LookAtRule::scene_center
                                             : LookAtRule::fixed_forward;
            ds.trajectory_spec.target = parse3(t.at("target"));
            ds.trajectory_spec.start = parse3(t.at("start"));
            ds.trajectory_spec.translation_direction = parse3(t.at("translation_direction"));
            ds.trajectory_spec.orbit_radius = t.at("orbit_radius");
            extrinsic.R = parse_rot(t.at("extrinsic").at("R"));
            extrinsic.p = parse3(t.at("extrinsic").at("p"));
            ds.trajectory_spec.extrinsic = extrinsic;

            const json& r = j.at("render");
            ds.render.noise_sigma = r.at("noise_sigma");
            ds.render.fov = r.at("fov");
            ds.render.seed = r.at("seed").get<std::uint64_t>();
            ds.render.min_segment_length = r.at("min_segment_length");
            ds.render.outlier_rate = r.at("outlier_rate");
            ds.render.clip_box_center = parse3(r.at("clip_box_center"));
            ds.render.clip_box_half_extents = parse3(r.at("clip_box_half_extents"));

            for (const json& ln : j.at("lines")) {
                SceneLine sl;
                sl.id = ln.at("id");
                sl.line = PluckerLine{parse3(ln.at("n")), parse3(ln.at("d")), Frame::world};
                sl.direction_class = ln.at("class");
                ds.scene.push_back(sl);
            }
        } else if (record == "frame") {
            if (!have_header) {
                throw IoError("frame record before header");
            }
            FrameBundle b;
            b.frame_id = j.at("frame_id");
            b.true_pose.R = parse_rot(j.at("pose").at("R"));
            b.true_pose.p = parse3(j.at("pose").at("p"));
            b.true_pose.extrinsic = extrinsic;
            try {
                b.true_pose.validate();
            } catch (const DegenerateInput& e) {
                throw IoError(std::string("dataset pose invalid: ") + e.what());
            }
            for (const json& s : j.at("segments")) {
                Segment2D seg;
                seg.id = s.at("id");
                seg.p_s = parse2(s.at("p_s"));
                seg.p_e = parse2(s.at("p_e"));
                b.segments.push_back(seg);
            }
            for (const json& v : j.at("vp_truth")) {
                b.vp_truth[v.at("class").get<int>()] = parse2(v.at("p_v"));
            }
            for (const json& a : j.at("associations")) {
                b.associations[a.at(0).get<std::int64_t>()] = a.at(1).get<std::int64_t>();
            }
            for (const json& d : j.at("degenerate_flags")) {
                b.degenerate_flags[d.at(0).get<std::int64_t>()] = d.at(1).get<int>() != 0;
            }
            ds.bundles.push_back(std::move(b));
        } else {
            throw IoError("unknown record type in dataset");
        }
    }
    if (!have_header) {
        throw IoError("dataset has no header record");
    }
    return ds;
}

std::string file_content_hash(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot hash missing file: " + path);
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!f) break;
    }
    char out[20];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace linemap
