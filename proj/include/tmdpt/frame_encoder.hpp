#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tmdpt/config.hpp"
#include "tmdpt/geometry.hpp"
#include "tmdpt/ops.hpp"
#include "tmdpt/params.hpp"

namespace tmdpt {

struct SaLevel {
  std::size_t centroids = 0;
  double radius = 0.0;
  std::size_t group_size = 0;
};

// Shared per-point MLP of one abstraction level. The first layer takes
// [local xyz, distance, features...] channels.
struct SaWeights {
  std::vector<Linear> mlp;
};

// CBAM-style channel gate: shared two-layer MLP (d -> d/r -> d) over max- and mean-pooled
// channel descriptors, gate = sigmoid(mlp(max) + mlp(mean)).
struct ChannelAttentionWeights {
  Linear hidden;
  Linear out;
};

struct EncoderWeights {
  SaWeights level1;
  SaWeights level2;
  std::optional<ChannelAttentionWeights> attention;  // level 2 only
  Linear spatial;   // region feature -> m3, max over regions gives FS_t
  Linear temporal;  // m3 -> m3 applied to FS_t + TP_t
};

EncoderWeights make_encoder_weights(ParameterStore& store, const EncoderConfig& config, Rng& rng);

// Geometry of one abstraction level for one frame. Pure function of the input points.
struct LevelPlan {
  GroupSpec groups;
  CompactGroups compact;
  Tensor local;                 // [compact rows, 4]
  std::vector<Vec3> centroids;  // sampled centroid coordinates
};

struct FramePlan {
  LevelPlan level1;  // over the frame's points
  LevelPlan level2;  // over the level-1 centroids
};

LevelPlan plan_level(std::span<const Vec3> points, const SaLevel& level);
FramePlan plan_frame(std::span<const Vec3> points, const EncoderConfig& config);

// Runs one abstraction level on a stack of frames sharing weights. features, when
// present, holds frames * points_per_frame rows in frame order.
Var apply_level(Graph& g, const SaWeights& weights, const ChannelAttentionWeights* attention,
                std::span<const LevelPlan* const> plans, std::optional<Var> features, std::size_t points_per_frame);

struct SetAbstractionOutput {
  std::vector<Vec3> centroids;
  Var features;  // [centroids, d]
};

// Sample, group, localize, shared MLP, optional channel gate and max over each group.
SetAbstractionOutput set_abstraction(Graph& g, const SaWeights& weights, const SaLevel& level,
                                     std::span<const Vec3> points, std::optional<Var> features,
                                     const ChannelAttentionWeights* attention = nullptr);

// Same computation on explicitly padded groups ([groups, K, channels]), used as a
// reference for the compact path.
Var set_abstraction_padded(Graph& g, const SaWeights& weights, const GroupSpec& spec, std::span<const Vec3> points,
                           const Tensor* features, const ChannelAttentionWeights* attention);

// grouped: [groups, K, d] -> same shape, every channel scaled by its gate.
Var channel_attention(Graph& g, const ChannelAttentionWeights& weights, Var grouped);

// regions: [frames * n2, d2 + 3] -> [frames, m3]
Var frame_spatial_feature(Graph& g, const Linear& mlp, Var regions, std::size_t frames);

// TP[2j] = sin(t / 10000^(2j/m3)), TP[2j+1] = cos(t / 10000^(2j/m3)).
Tensor temporal_position_encoding(std::size_t t, std::size_t m3);
// Rows 0..frames-1 of temporal_position_encoding.
Tensor temporal_position_table(std::size_t frames, std::size_t m3);

// FT = MLP(FS + TP), row-wise.
Var frame_temporal_feature(Graph& g, const Linear& mlp, Var spatial, Var position);

struct ClipEncoding {
  Var regions;   // [q * n2, d2 + 3]: e^t_j rows, frame-major
  Var spatial;   // [q, m3]: FS_t
  Var temporal;  // [q, m3]: FT_t
  std::size_t frames = 0;
  std::size_t regions_per_frame = 0;
};

ClipEncoding encode_clip(Graph& g, const EncoderWeights& weights, const EncoderConfig& config,
                         std::span<const FramePlan> plans);

struct FrameFeatureBundle {
  Tensor regions;   // [n2, d2 + 3]
  Tensor spatial;   // [m3]
  Tensor temporal;  // [m3]
  std::size_t t = 0;
};

std::vector<FrameFeatureBundle> bundles(const ClipEncoding& encoding);

}  // namespace tmdpt
