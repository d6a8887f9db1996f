#include "tmdpt/ifs.hpp"

#include "tmdpt/errors.hpp"
#include "tmdpt/random.hpp"

namespace tmdpt {

std::vector<std::uint32_t> interval_indices(std::size_t n, std::size_t k, IntervalMode mode) {
  if (n < 1 || k < 1) throw ContractError("interval_indices requires N >= 1 and k >= 1");
  Rng rng(mode.seed);
  std::vector<std::uint32_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t lo = i * n / k;
    const std::size_t hi = (i + 1) * n / k;
    std::size_t pick;
    if (hi <= lo) {
      pick = std::min(lo, n - 1);
    } else if (mode.kind == IntervalMode::Kind::Midpoint) {
      pick = (lo + hi - 1) / 2;
    } else {
      pick = std::uniform_int_distribution<std::size_t>(lo, hi - 1)(rng);
    }
    out.push_back(static_cast<std::uint32_t>(pick));
  }
  return out;
}

ClipPool ifs_step1(const std::string& source_id, std::size_t frame_count, std::size_t p, std::uint64_t dataset_seed) {
  if (frame_count == 0) throw DataError("IFS step I on an empty video: " + source_id);
  const std::uint64_t seed = derive_seed(dataset_seed, SeedStage::PoolSelection, hash_string(source_id));
  return {source_id, interval_indices(frame_count, p, IntervalMode::random(seed))};
}

ClipPool ifs_step1(const PointCloudVideo& video, std::size_t p, std::uint64_t dataset_seed) {
  return ifs_step1(video.source_id, video.frames.size(), p, dataset_seed);
}

std::vector<std::uint32_t> ifs_step2(const ClipPool& pool, std::size_t q, std::uint64_t epoch, std::uint64_t run_seed,
                                     bool eval_mode) {
  const std::size_t p = pool.frame_indices.size();
  if (q > p) {
    throw ContractError("IFS step II: bottom frame rate " + std::to_string(q) + " exceeds top frame rate " +
                        std::to_string(p));
  }
  if (eval_mode) return interval_indices(p, q, IntervalMode::midpoint());
  const std::uint64_t seed = derive_seed(run_seed, SeedStage::ClipSelection, hash_string(pool.video_ref), epoch);
  return interval_indices(p, q, IntervalMode::random(seed));
}

Clip make_clip(const std::vector<PointCloudFrame>& pool_frames, std::vector<std::uint32_t> positions,
               std::optional<std::uint32_t> label) {
  Clip clip;
  clip.label = label;
  clip.frames.reserve(positions.size());
  for (std::uint32_t pos : positions) {
    if (pos >= pool_frames.size()) throw ContractError("clip position outside the pool");
    clip.frames.push_back(pool_frames[pos]);
  }
  clip.pool_positions = std::move(positions);
  return clip;
}

}  // namespace tmdpt
