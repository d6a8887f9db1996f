#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tmdpt/config.hpp"
#include "tmdpt/frame_encoder.hpp"
#include "tmdpt/ifs.hpp"
#include "tmdpt/pointcloud_io.hpp"
#include "tmdpt/random.hpp"

namespace tmdpt {

// A video after the once-per-run steps: per-video normalization, Step I pool selection,
// random subsample to raw_points and farthest-point subsample to points_per_frame.
struct PreparedVideo {
  std::string source_id;
  std::uint32_t label = kUnlabeled;
  ClipPool pool;
  std::vector<std::vector<Vec3>> frames;  // one per pool entry
};

PreparedVideo prepare_video(const PointCloudVideo& video, const RunConfig& config);

struct Dataset {
  std::vector<PreparedVideo> videos;

  std::size_t size() const { return videos.size(); }
};

// Reads manifest.jsonl and every listed .pcv file under dir. The manifest label wins; a
// labeled file that disagrees with it is a DataError.
Dataset load_dataset(const std::filesystem::path& dir, const RunConfig& config, std::size_t threads = 0);

// Step II positions for one clip: fresh per epoch in training, midpoints in evaluation.
std::vector<std::uint32_t> clip_positions(const PreparedVideo& video, const RunConfig& config, std::uint64_t epoch,
                                          bool eval_mode);

// Rotation about the vertical axis, uniform in +-10 degrees, plus N(0, 0.01^2) jitter per
// coordinate. One rotation per clip.
void augment_clip(std::vector<std::vector<Vec3>>& frames, Rng& rng);

// Geometry plans for the clip's frames, ready for TmdptModel::forward.
std::vector<FramePlan> clip_plans(const PreparedVideo& video, const RunConfig& config, std::uint64_t epoch,
                                  bool eval_mode, bool augment = false);

}  // namespace tmdpt
