#include "tmdpt/model.hpp"

#include "tmdpt/errors.hpp"
#include "tmdpt/random.hpp"

namespace tmdpt {

namespace {

std::size_t tokens_for(const ModelConfig& config) {
  if (!config.split.two_stream) return 1;
  return temporal_split(config.clip_frames, config.split).size() + 1;
}

}  // namespace

TmdptModel::TmdptModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  const EncoderConfig& e = config_.encoder;
  if (e.centroids_level1 > e.points_per_frame || e.centroids_level2 > e.centroids_level1) {
    throw ConfigError("centroid counts must satisfy n2 <= n1 <= points_per_frame");
  }
  if (e.frame_feature_width == 0 || e.frame_feature_width % 2 != 0) throw ConfigError("frame_feature_width must be even");
  if (e.sa1_widths.empty() || e.sa2_widths.empty()) throw ConfigError("set abstraction MLPs need at least one layer");
  if (e.channel_attention && (e.ca_reduction == 0 || e.level2_width() / e.ca_reduction == 0)) {
    throw ConfigError("ca_reduction leaves no hidden channels");
  }
  Rng rng(derive_seed(seed, SeedStage::Init));
  encoder_ = make_encoder_weights(store_, e, rng);
  head_ = make_head_weights(store_, config_.transformer, layout(), tokens_for(config_), rng);
}

std::size_t TmdptModel::token_count() const { return tokens_for(config_); }

TmdptModel::Output TmdptModel::forward(Graph& g, std::span<const FramePlan> plans, bool capture_attention) const {
  if (plans.size() != config_.clip_frames) {
    throw DimensionError("clip has " + std::to_string(plans.size()) + " frames, model expects " +
                         std::to_string(config_.clip_frames));
  }
  Output out;
  out.encoding = encode_clip(g, encoder_, config_.encoder, plans);
  out.features = aggregate_clip(out.encoding, layout(), config_.split);
  out.head = run_head(g, head_, config_.transformer, out.features, capture_attention);
  return out;
}

Var TmdptModel::loss(Graph& g, std::span<const FramePlan> plans, std::size_t label) const {
  return cross_entropy(forward(g, plans).head.logits, label);
}

std::vector<double> TmdptModel::probabilities(std::span<const FramePlan> plans) const {
  Graph g;
  return softmax(forward(g, plans).head.logits.value().data());
}

}  // namespace tmdpt
