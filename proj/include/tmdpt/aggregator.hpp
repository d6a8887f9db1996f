#pragma once

#include <span>
#include <utility>
#include <vector>

#include "tmdpt/config.hpp"
#include "tmdpt/frame_encoder.hpp"

namespace tmdpt {

struct FrameRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  std::size_t size() const { return end - begin; }
  friend bool operator==(const FrameRange&, const FrameRange&) = default;
};

// Consecutive segments of segment_frames frames; with overlap > 0 the start advances by
// segment_frames * (1 - overlap). Throws ContractError when the spec does not tile q frames.
std::vector<FrameRange> temporal_split(std::size_t q, const SplitSpec& spec);

// Channel layout of one aggregated row: [L | A | M].
struct FeatureLayout {
  std::size_t region_width = 0;  // L: d2 + 3
  std::size_t frame_width = 0;   // A and M: m3

  std::size_t l_offset() const { return 0; }
  std::size_t a_offset() const { return region_width; }
  std::size_t m_offset() const { return region_width + frame_width; }
  std::size_t width() const { return region_width + 2 * frame_width; }
};

FeatureLayout feature_layout(const EncoderConfig& config);

// S_g as a [1, D] row: max over every region row, FS row and FT row of the clip.
Var aggregate_global(const ClipEncoding& encoding);
// S_i as a [1, D] row over the frames of range. literal_partial_motion reads FS for the M slot.
Var aggregate_partial(const ClipEncoding& encoding, FrameRange range, bool literal_partial_motion = false);

struct IntegratedFeature {
  Var rows;  // [ts + 1, D], S_g first
  FeatureLayout layout;
  std::size_t segments = 0;
};

IntegratedFeature integrate(Var global, const std::vector<Var>& partials, const FeatureLayout& layout);

// Global row plus one partial row per segment, or the global row alone when two_stream is off.
IntegratedFeature aggregate_clip(const ClipEncoding& encoding, const FeatureLayout& layout, const SplitSpec& split);

// Value-level forms over extracted bundles.
Tensor aggregate_global(std::span<const FrameFeatureBundle> bundles);
Tensor aggregate_partial(std::span<const FrameFeatureBundle> bundles, FrameRange range, bool literal_partial_motion = false);
Tensor integrate(const Tensor& global, std::span<const Tensor> partials);

}  // namespace tmdpt
