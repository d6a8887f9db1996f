#include "tmdpt/frame_encoder.hpp"

#include <cmath>

#include "tmdpt/errors.hpp"

namespace tmdpt {

EncoderWeights make_encoder_weights(ParameterStore& store, const EncoderConfig& config, Rng& rng) {
  EncoderWeights w;
  std::size_t in = 4;
  for (std::size_t i = 0; i < config.sa1_widths.size(); ++i) {
    w.level1.mlp.push_back(make_linear(store, "encoder.sa1.mlp" + std::to_string(i), in, config.sa1_widths[i], rng));
    in = config.sa1_widths[i];
  }
  in = 4 + config.level1_width();
  for (std::size_t i = 0; i < config.sa2_widths.size(); ++i) {
    w.level2.mlp.push_back(make_linear(store, "encoder.sa2.mlp" + std::to_string(i), in, config.sa2_widths[i], rng));
    in = config.sa2_widths[i];
  }
  if (config.channel_attention) {
    const std::size_t d = config.level2_width();
    const std::size_t hidden = d / config.ca_reduction;
    w.attention = ChannelAttentionWeights{make_linear(store, "encoder.ca.hidden", d, hidden, rng),
                                          make_linear(store, "encoder.ca.out", hidden, d, rng)};
  }
  w.spatial = make_linear(store, "encoder.spatial", config.region_width(), config.frame_feature_width, rng);
  w.temporal = make_linear(store, "encoder.temporal", config.frame_feature_width, config.frame_feature_width, rng);
  return w;
}

LevelPlan plan_level(std::span<const Vec3> points, const SaLevel& level) {
  LevelPlan plan;
  const auto centroids = farthest_point_sampling(points, level.centroids);
  plan.groups = ball_query(points, centroids, level.radius, level.group_size);
  plan.compact = compact_groups(plan.groups);
  plan.local = localize_compact(points, plan.groups, plan.compact);
  plan.centroids.reserve(centroids.size());
  for (std::uint32_t c : centroids) plan.centroids.push_back(points[c]);
  return plan;
}

FramePlan plan_frame(std::span<const Vec3> points, const EncoderConfig& config) {
  if (points.size() != config.points_per_frame) {
    throw ContractError("frame has " + std::to_string(points.size()) + " points, encoder expects " +
                        std::to_string(config.points_per_frame));
  }
  FramePlan plan;
  plan.level1 = plan_level(points, {config.centroids_level1, config.radius_level1, config.group_size_level1});
  plan.level2 = plan_level(plan.level1.centroids, {config.centroids_level2, config.radius_level2, config.group_size_level2});
  return plan;
}

namespace {

Var mlp_tail(Graph& g, const SaWeights& weights, Var h) {
  for (std::size_t i = 1; i < weights.mlp.size(); ++i) h = relu(weights.mlp[i](g, h));
  return h;
}

Var gate_mlp(Graph& g, const ChannelAttentionWeights& w, Var x) { return w.out(g, relu(w.hidden(g, x))); }

}  // namespace

Var apply_level(Graph& g, const SaWeights& weights, const ChannelAttentionWeights* attention,
                std::span<const LevelPlan* const> plans, std::optional<Var> features, std::size_t points_per_frame) {
  if (plans.empty()) throw ContractError("apply_level needs at least one frame");
  std::size_t rows = 0;
  for (const LevelPlan* p : plans) rows += p->compact.members.size();

  Tensor local({rows, 4});
  std::vector<std::uint32_t> offsets{0};
  std::vector<double> row_weights;
  std::vector<std::uint32_t> gather;
  row_weights.reserve(rows);
  gather.reserve(rows);
  std::size_t row = 0;
  for (std::size_t f = 0; f < plans.size(); ++f) {
    const LevelPlan& p = *plans[f];
    std::copy(p.local.data().begin(), p.local.data().end(), local.data().begin() + row * 4);
    for (std::size_t s = 1; s < p.compact.offsets.size(); ++s) offsets.push_back(static_cast<std::uint32_t>(row + p.compact.offsets[s]));
    row_weights.insert(row_weights.end(), p.compact.weights.begin(), p.compact.weights.end());
    for (std::uint32_t m : p.compact.members) gather.push_back(static_cast<std::uint32_t>(f * points_per_frame + m));
    row += p.compact.members.size();
  }

  const Linear& first = weights.mlp.front();
  Var geo = g.input(std::move(local));
  Var h;
  if (!features) {
    if (first.in != 4) throw DimensionError("first-level MLP expects 4 input channels");
    h = first(g, geo);
  } else {
    const std::size_t f = features->shape().at(1);
    if (first.in != 4 + f) throw DimensionError("MLP input width does not match 4 + feature width");
    if (features->shape().at(0) != plans.size() * points_per_frame) {
      throw DimensionError("feature rows do not match frames x points per frame");
    }
    // The first layer is linear in [geo | features], so the feature half is projected
    // once per point and then gathered into the groups.
    Var w = g.param(*first.weight);
    Var projected = matmul(*features, slice(w, 0, 4, 4 + f));
    h = add(matmul(geo, slice(w, 0, 0, 4)), gather_rows(projected, std::move(gather)));
    if (first.bias) h = add_bias(h, g.param(*first.bias));
  }
  h = mlp_tail(g, weights, relu(h));

  if (!attention) return segment_max(h, offsets);
  // Gates are positive per group and channel, so max over gated members equals the gate
  // times the max over members.
  Var pooled_max = segment_max(h, offsets);
  Var pooled_mean = segment_weighted_sum(h, offsets, row_weights);
  Var gate = sigmoid(add(gate_mlp(g, *attention, pooled_max), gate_mlp(g, *attention, pooled_mean)));
  return mul(gate, pooled_max);
}

SetAbstractionOutput set_abstraction(Graph& g, const SaWeights& weights, const SaLevel& level,
                                     std::span<const Vec3> points, std::optional<Var> features,
                                     const ChannelAttentionWeights* attention) {
  LevelPlan plan = plan_level(points, level);
  const LevelPlan* plans[] = {&plan};
  Var out = apply_level(g, weights, attention, plans, features, points.size());
  return {std::move(plan.centroids), out};
}

Var set_abstraction_padded(Graph& g, const SaWeights& weights, const GroupSpec& spec, std::span<const Vec3> points,
                           const Tensor* features, const ChannelAttentionWeights* attention) {
  Tensor grouped = group_and_localize(points, features, spec);
  const std::size_t groups = grouped.dim(0), k = grouped.dim(1), channels = grouped.dim(2);
  Var h = g.input(grouped.reshaped({groups * k, channels}));
  for (const Linear& layer : weights.mlp) h = relu(layer(g, h));
  h = reshape(h, {groups, k, weights.mlp.back().out});
  if (attention) h = channel_attention(g, *attention, h);
  return max_reduce(h, 1);
}

Var channel_attention(Graph& g, const ChannelAttentionWeights& weights, Var grouped) {
  if (grouped.shape().size() != 3) throw DimensionError("channel_attention expects [groups, K, d]");
  Var pooled_max = max_reduce(grouped, 1);
  Var pooled_mean = mean_reduce(grouped, 1);
  Var gate = sigmoid(add(gate_mlp(g, weights, pooled_max), gate_mlp(g, weights, pooled_mean)));
  return scale_channels(grouped, gate);
}

Var frame_spatial_feature(Graph& g, const Linear& mlp, Var regions, std::size_t frames) {
  const Shape& s = regions.shape();
  if (s.size() != 2 || frames == 0 || s[0] % frames != 0) {
    throw DimensionError("region features " + shape_str(s) + " cannot be split into " + std::to_string(frames) + " frames");
  }
  Var h = relu(mlp(g, regions));
  return max_reduce(reshape(h, {frames, s[0] / frames, mlp.out}), 1);
}

Tensor temporal_position_encoding(std::size_t t, std::size_t m3) {
  if (m3 == 0 || m3 % 2 != 0) throw ContractError("temporal position encoding width must be even");
  Tensor tp({m3});
  for (std::size_t j = 0; 2 * j < m3; ++j) {
    const double angle = static_cast<double>(t) / std::pow(10000.0, static_cast<double>(2 * j) / static_cast<double>(m3));
    tp[2 * j] = std::sin(angle);
    tp[2 * j + 1] = std::cos(angle);
  }
  return tp;
}

Tensor temporal_position_table(std::size_t frames, std::size_t m3) {
  Tensor table({frames, m3});
  for (std::size_t t = 0; t < frames; ++t) {
    const Tensor row = temporal_position_encoding(t, m3);
    std::copy(row.data().begin(), row.data().end(), table.data().begin() + t * m3);
  }
  return table;
}

Var frame_temporal_feature(Graph& g, const Linear& mlp, Var spatial, Var position) {
  if (spatial.shape() != position.shape()) {
    throw DimensionError("frame spatial feature " + shape_str(spatial.shape()) + " and positional feature " +
                         shape_str(position.shape()) + " differ");
  }
  return relu(mlp(g, add(spatial, position)));
}

ClipEncoding encode_clip(Graph& g, const EncoderWeights& weights, const EncoderConfig& config,
                         std::span<const FramePlan> plans) {
  if (plans.empty()) throw ContractError("encode_clip needs at least one frame");
  std::vector<const LevelPlan*> level1, level2;
  for (const FramePlan& p : plans) {
    level1.push_back(&p.level1);
    level2.push_back(&p.level2);
  }
  const std::size_t frames = plans.size();
  const std::size_t n1 = config.centroids_level1, n2 = config.centroids_level2;

  Var f1 = apply_level(g, weights.level1, nullptr, level1, std::nullopt, config.points_per_frame);
  Var f2 = apply_level(g, weights.level2, weights.attention ? &*weights.attention : nullptr, level2, f1, n1);

  Tensor coords({frames * n2, 3});
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t j = 0; j < n2; ++j) {
      const Vec3 c = plans[f].level2.centroids[j];
      coords.at(f * n2 + j, 0) = c.x;
      coords.at(f * n2 + j, 1) = c.y;
      coords.at(f * n2 + j, 2) = c.z;
    }
  }

  ClipEncoding enc;
  enc.frames = frames;
  enc.regions_per_frame = n2;
  enc.regions = concat({f2, g.input(std::move(coords))}, 1);
  enc.spatial = frame_spatial_feature(g, weights.spatial, enc.regions, frames);
  enc.temporal = frame_temporal_feature(g, weights.temporal, enc.spatial,
                                        g.input(temporal_position_table(frames, config.frame_feature_width)));
  return enc;
}

std::vector<FrameFeatureBundle> bundles(const ClipEncoding& encoding) {
  std::vector<FrameFeatureBundle> out;
  const Tensor& regions = encoding.regions.value();
  const Tensor& spatial = encoding.spatial.value();
  const Tensor& temporal = encoding.temporal.value();
  const std::size_t n2 = encoding.regions_per_frame, width = regions.cols();
  for (std::size_t t = 0; t < encoding.frames; ++t) {
    FrameFeatureBundle b;
    b.t = t;
    b.regions = Tensor({n2, width}, std::vector<double>(regions.data().begin() + t * n2 * width,
                                                        regions.data().begin() + (t + 1) * n2 * width));
    b.spatial = spatial.row(t);
    b.temporal = temporal.row(t);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace tmdpt
