#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "tmdpt/pointcloud_io.hpp"

namespace tmdpt {

// Two-agent interaction videos. Each agent is five limb segments (torso, two arms, two
// legs) sampled as Gaussian point clusters; classes differ by their relative-motion
// program:
//   0 handshake  agents approach, right hands meet at waist height and pump
//   1 hug        one agent walks in, torsos merge, arms wrap behind the other's back
//   2 high_five  agents approach, right hands meet above head height and drop
//   3 kick       one leg swings out toward the other agent, who leans back
//   4 push       agents start close, hands on the chest, one torso is driven away
//   5 walk_past  agents walk past each other on offset lines with no contact
struct SyntheticSpec {
  std::size_t num_classes = 6;
  std::size_t samples_per_class = 120;
  std::size_t frames = 60;
  std::size_t points_per_limb = 40;
  double point_noise = 0.025;   // limb cluster std dev, meters
  double timing_jitter = 0.08;  // event onset shift, fraction of the video
  double max_rotation_deg = 30.0;
  std::size_t clutter_points = 12;  // outliers scattered around the bodies per frame
};

const std::vector<std::string>& synthetic_class_names();

// Unknown keys throw ConfigError.
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SyntheticSpec& spec);

// Deterministic in (spec, seed, label, index); coordinates in meters.
PointCloudVideo generate_synthetic_video(const SyntheticSpec& spec, std::uint64_t seed, std::uint32_t label,
                                         std::size_t index);

struct ManifestEntry {
  std::string file;  // relative to the dataset directory
  std::uint32_t label = 0;
  std::string class_name;
};

// Writes <class>_<index>.pcv files and manifest.jsonl; returns the manifest rows.
std::vector<ManifestEntry> generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed,
                                                      const std::filesystem::path& out_dir);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir, const std::vector<ManifestEntry>& entries);

}  // namespace tmdpt
