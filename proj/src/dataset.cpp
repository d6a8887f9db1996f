#include "tmdpt/dataset.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "tmdpt/errors.hpp"
#include "tmdpt/geometry.hpp"
#include "tmdpt/parallel.hpp"
#include "tmdpt/synthetic.hpp"

namespace tmdpt {

PreparedVideo prepare_video(const PointCloudVideo& raw, const RunConfig& config) {
  if (raw.frames.empty()) throw DataError("video " + raw.source_id + " has no frames");
  const PointCloudVideo video = normalize_video(raw);
  PreparedVideo out;
  out.source_id = raw.source_id;
  out.label = raw.label.value_or(kUnlabeled);
  if (config.sampling.mode == SamplingMode::Ifs) {
    out.pool = ifs_step1(video, config.sampling.top_frame_rate, config.dataset_seed);
  } else {
    out.pool = {raw.source_id,
                interval_indices(video.frames.size(), config.sampling.fixed_frames, IntervalMode::midpoint())};
  }
  const std::uint64_t source = hash_string(raw.source_id);
  out.frames.reserve(out.pool.frame_indices.size());
  for (std::uint32_t index : out.pool.frame_indices) {
    const PointCloudFrame& frame = video.frames[index];
    if (frame.points.empty()) throw DataError("video " + raw.source_id + " frame " + std::to_string(index) + " is empty");
    const PointCloudFrame sampled = random_downsample(
        frame, config.encoder.raw_points, derive_seed(config.dataset_seed, SeedStage::Downsample, source, index));
    const auto picks = farthest_point_sampling(sampled.points, std::min(config.encoder.points_per_frame, sampled.points.size()));
    std::vector<Vec3> points;
    points.reserve(config.encoder.points_per_frame);
    for (std::uint32_t p : picks) points.push_back(sampled.points[p]);
    // Fewer raw points than points_per_frame: repeat in FPS order to keep the frame size fixed.
    for (std::size_t i = 0; points.size() < config.encoder.points_per_frame; ++i) points.push_back(points[i]);
    out.frames.push_back(std::move(points));
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& dir, const RunConfig& config, std::size_t threads) {
  const std::vector<ManifestEntry> manifest = read_manifest(dir);
  Dataset data;
  data.videos.resize(manifest.size());
  parallel_for(manifest.size(), threads, [&](std::size_t i) {
    const ManifestEntry& entry = manifest[i];
    PointCloudVideo video = read_pcv(dir / entry.file);
    if (video.label && *video.label != entry.label) {
      throw DataError(entry.file + " is labeled " + std::to_string(*video.label) + " but the manifest says " +
                      std::to_string(entry.label));
    }
    if (entry.label >= config.transformer.num_classes) {
      throw DataError(entry.file + " has label " + std::to_string(entry.label) + " outside num_classes " +
                      std::to_string(config.transformer.num_classes));
    }
    video.label = entry.label;
    data.videos[i] = prepare_video(video, config);
  });
  return data;
}

std::vector<std::uint32_t> clip_positions(const PreparedVideo& video, const RunConfig& config, std::uint64_t epoch,
                                          bool eval_mode) {
  if (config.sampling.mode == SamplingMode::FixedUniform) {
    std::vector<std::uint32_t> all(video.pool.frame_indices.size());
    std::iota(all.begin(), all.end(), 0u);
    return all;
  }
  return ifs_step2(video.pool, config.sampling.bottom_frame_rate, epoch, config.seed, eval_mode);
}

void augment_clip(std::vector<std::vector<Vec3>>& frames, Rng& rng) {
  const double theta = std::uniform_real_distribution<double>(-10.0, 10.0)(rng) * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  std::normal_distribution<double> jitter(0.0, 0.01);
  for (auto& frame : frames) {
    for (Vec3& p : frame) {
      const double x = c * p.x + s * p.z, z = -s * p.x + c * p.z;
      p = {x + jitter(rng), p.y + jitter(rng), z + jitter(rng)};
    }
  }
}

std::vector<FramePlan> clip_plans(const PreparedVideo& video, const RunConfig& config, std::uint64_t epoch,
                                  bool eval_mode, bool augment) {
  const auto positions = clip_positions(video, config, epoch, eval_mode);
  std::vector<std::vector<Vec3>> frames;
  frames.reserve(positions.size());
  for (std::uint32_t pos : positions) frames.push_back(video.frames.at(pos));
  if (augment) {
    Rng rng(derive_seed(config.seed, SeedStage::Augment, hash_string(video.source_id), epoch));
    augment_clip(frames, rng);
  }
  std::vector<FramePlan> plans;
  plans.reserve(frames.size());
  for (const auto& f : frames) plans.push_back(plan_frame(f, config.encoder));
  return plans;
}

}  // namespace tmdpt
