#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "linemap/simulator.hpp"

namespace linemap {

inline constexpr int kDatasetSchemaVersion = 1;

// A simulated sequence: header (spec echo plus ground truth) and one frame
// bundle per line of the file.
struct Dataset {
    int schema_version = kDatasetSchemaVersion;
    std::uint64_t seed = 0;
    SceneSpec scene_spec;
    TrajectorySpec trajectory_spec;
    RenderOptions render;
    std::vector<SceneLine> scene;
    std::vector<FrameBundle> bundles;
};

// JSON-lines, floats with 17 significant digits; deterministic byte-for-byte
// for identical inputs.
void emit_dataset(const Dataset& dataset, const std::string& path);

Dataset read_dataset(const std::string& path);

std::string format_double(double v);  // %.17g

// FNV-1a 64 content hash of a file, as fixed-width hex.
std::string file_content_hash(const std::string& path);

}  // namespace linemap
