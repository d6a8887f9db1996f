#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tmdpt/aggregator.hpp"
#include "tmdpt/config.hpp"
#include "tmdpt/frame_encoder.hpp"
#include "tmdpt/params.hpp"
#include "tmdpt/transformer.hpp"

namespace tmdpt {

// Frame encoder, two-stream aggregation and transformer head with one parameter store.
class TmdptModel {
 public:
  TmdptModel(const ModelConfig& config, std::uint64_t seed);
  TmdptModel(const TmdptModel&) = delete;
  TmdptModel& operator=(const TmdptModel&) = delete;

  struct Output {
    ClipEncoding encoding;
    IntegratedFeature features;
    HeadOutput head;
  };

  // plans: one per clip frame, in clip order.
  Output forward(Graph& g, std::span<const FramePlan> plans, bool capture_attention = false) const;
  Var loss(Graph& g, std::span<const FramePlan> plans, std::size_t label) const;
  std::vector<double> probabilities(std::span<const FramePlan> plans) const;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const EncoderWeights& encoder() const { return encoder_; }
  const HeadWeights& head() const { return head_; }
  FeatureLayout layout() const { return feature_layout(config_.encoder); }
  std::size_t token_count() const;
  std::size_t parameter_count() const { return store_.scalar_count(); }

 private:
  ModelConfig config_;
  ParameterStore store_;
  EncoderWeights encoder_;
  HeadWeights head_;
};

}  // namespace tmdpt
