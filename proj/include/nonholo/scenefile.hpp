#ifndef NONHOLO_SCENEFILE_HPP
#define NONHOLO_SCENEFILE_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nonholo/flow.hpp"
#include "nonholo/gvf.hpp"

namespace nonholo {

inline constexpr const char* kToolVersion = "0.1.0";

struct LoadedScene {
    Scene scene;          // path already traced, orientation fixed
    WeightSpec weights;
    nlohmann::json raw;   // canonical parsed scene file
    std::string digest;   // FNV-1a of the canonical dump
};

// Strict schema: unknown keys anywhere are rejected (SchemaError).
LoadedScene load_scene(const std::filesystem::path& file);
LoadedScene load_scene_json(const nlohmann::json& j);

IntegratorConfig integrator_config(const Scene& scene);

std::string fnv1a_digest(const std::string& data);

struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string scene_digest;
    std::string config_hash;
    std::vector<std::string> outputs;

    nlohmann::json to_json() const;
    void write(const std::filesystem::path& dir) const;
    static RunManifest read(const std::filesystem::path& dir); // throws if absent
};

// Trajectory CSV: header + one row per sample, %.17g numbers.
void write_trajectory_csv(const std::filesystem::path& file, const Trajectory& traj);

std::string format_g17(double v);

} // namespace nonholo

#endif
