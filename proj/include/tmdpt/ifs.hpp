#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tmdpt/pointcloud_io.hpp"

namespace tmdpt {

// How a frame is picked inside each interval [floor(i*N/k), floor((i+1)*N/k)).
struct IntervalMode {
  enum class Kind { Random, Midpoint };
  Kind kind = Kind::Midpoint;
  std::uint64_t seed = 0;

  static IntervalMode random(std::uint64_t seed) { return {Kind::Random, seed}; }
  static IntervalMode midpoint() { return {Kind::Midpoint, 0}; }
};

// One index per interval. Empty intervals (N < k) reuse the interval start clamped to N-1.
std::vector<std::uint32_t> interval_indices(std::size_t n, std::size_t k, IntervalMode mode);

// Step I: the p frames that represent a video for the whole run.
struct ClipPool {
  std::string video_ref;
  std::vector<std::uint32_t> frame_indices;
};

ClipPool ifs_step1(const PointCloudVideo& video, std::size_t p, std::uint64_t dataset_seed);
ClipPool ifs_step1(const std::string& source_id, std::size_t frame_count, std::size_t p, std::uint64_t dataset_seed);

// Step II: q positions into the pool. Training draws fresh positions per epoch;
// evaluation uses interval midpoints and ignores the epoch.
std::vector<std::uint32_t> ifs_step2(const ClipPool& pool, std::size_t q, std::uint64_t epoch, std::uint64_t run_seed,
                                     bool eval_mode);

struct Clip {
  std::vector<PointCloudFrame> frames;
  std::vector<std::uint32_t> pool_positions;
  std::optional<std::uint32_t> label;
};

// Gathers the frames at the given pool positions; pool_frames[i] is the frame at
// pool.frame_indices[i].
Clip make_clip(const std::vector<PointCloudFrame>& pool_frames, std::vector<std::uint32_t> positions,
               std::optional<std::uint32_t> label);

}  // namespace tmdpt
