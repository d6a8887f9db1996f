#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace tmdpt {

struct EncoderConfig {
  std::size_t raw_points = 2048;        // random subsample of each frame
  std::size_t points_per_frame = 512;   // farthest-point subsample fed to the encoder
  std::size_t centroids_level1 = 128;
  std::size_t centroids_level2 = 32;
  double radius_level1 = 0.06;
  double radius_level2 = 0.1;
  std::size_t group_size_level1 = 32;
  std::size_t group_size_level2 = 32;
  std::vector<std::size_t> sa1_widths{64};
  std::vector<std::size_t> sa2_widths{128};
  std::size_t frame_feature_width = 256;  // m3
  bool channel_attention = true;
  std::size_t ca_reduction = 4;

  std::size_t level1_width() const { return sa1_widths.back(); }
  std::size_t level2_width() const { return sa2_widths.back(); }
  std::size_t region_width() const { return level2_width() + 3; }
};

enum class SamplingMode { Ifs, FixedUniform };

struct SamplingConfig {
  SamplingMode mode = SamplingMode::Ifs;
  std::size_t top_frame_rate = 50;     // p
  std::size_t bottom_frame_rate = 24;  // q
  std::size_t fixed_frames = 24;       // k for fixed_uniform

  std::size_t pool_frames() const { return mode == SamplingMode::Ifs ? top_frame_rate : fixed_frames; }
  std::size_t clip_frames() const { return mode == SamplingMode::Ifs ? bottom_frame_rate : fixed_frames; }
};

struct SplitSpec {
  bool two_stream = true;
  std::size_t segments = 6;        // ts
  std::size_t segment_frames = 4;  // u
  double overlap = 0.0;
  bool partial_motion_literal = false;  // partial motion slot reads frame spatial features
};

enum class TransformerInput { MultiLevel, MotionOnly };
enum class OutputAggregation { Mlp, MaxPool };

struct TransformerConfig {
  bool enabled = true;
  std::size_t blocks = 5;
  std::size_t heads = 18;
  std::size_t d_model = 288;
  std::size_t ffn_width = 0;  // 0 selects 4 * d_model
  TransformerInput input = TransformerInput::MultiLevel;
  OutputAggregation output_aggregation = OutputAggregation::Mlp;
  std::size_t num_classes = 6;

  std::size_t head_width() const { return d_model / heads; }
  std::size_t feed_forward_width() const { return ffn_width ? ffn_width : 4 * d_model; }
};

struct ModelConfig {
  EncoderConfig encoder;
  SplitSpec split;
  TransformerConfig transformer;
  std::size_t clip_frames = 24;

  std::size_t feature_width() const { return encoder.region_width() + 2 * encoder.frame_feature_width; }
};

struct RunConfig {
  EncoderConfig encoder;
  SamplingConfig sampling;
  SplitSpec split;
  TransformerConfig transformer;

  std::size_t epochs = 90;
  std::size_t batch_size = 32;
  double lr = 0.001;
  double lr_decay = 0.5;
  int lr_decay_every = 10;
  std::uint64_t seed = 1;
  std::uint64_t dataset_seed = 1;
  bool augmentation = false;
  double voxel_size = 0.05;
  std::string init = "fan_in_uniform";
  std::size_t threads = 0;  // 0 = hardware concurrency
  std::string train_data;
  std::string test_data;
  std::string checkpoint = "model.tmdp";
  std::string metrics = "metrics.csv";

  ModelConfig model() const { return {encoder, split, transformer, sampling.clip_frames()}; }
};

// Throws ConfigError describing the first violated constraint.
void validate(const RunConfig& config);

nlohmann::json to_json(const RunConfig& config);
// Unknown keys and wrongly typed values throw ConfigError; missing keys keep defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& config);

// Desk-scale settings used by gradcheck and the overfit sanity run.
RunConfig tiny_run_config();

}  // namespace tmdpt
