#include "tmdpt/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include "tmdpt/errors.hpp"

namespace tmdpt {
namespace {

using nlohmann::json;

std::string sampling_name(SamplingMode m) { return m == SamplingMode::Ifs ? "ifs" : "fixed_uniform"; }
std::string input_name(TransformerInput i) { return i == TransformerInput::MultiLevel ? "multi_level" : "motion_only"; }
std::string agg_name(OutputAggregation a) { return a == OutputAggregation::Mlp ? "mlp" : "maxpool"; }

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.get<long long>() < 0) throw ConfigError("");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key \"" + key + "\" has the wrong type: " + v.dump());
  }
}

std::vector<std::size_t> get_widths(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) throw ConfigError("config key \"" + key + "\" must be a nonempty array of widths");
  std::vector<std::size_t> out;
  for (const auto& e : v) out.push_back(get_as<std::size_t>(e, key));
  return out;
}

const std::map<std::string, std::function<void(RunConfig&, const json&, const std::string&)>>& setters() {
  using S = std::function<void(RunConfig&, const json&, const std::string&)>;
  static const std::map<std::string, S> table = {
      // frame encoder
      {"raw_points", [](RunConfig& c, const json& v, const std::string& k) { c.encoder.raw_points = get_as<std::size_t>(v, k); }},
      {"points_per_frame", [](RunConfig& c, const json& v, const std::string& k) { c.encoder.points_per_frame = get_as<std::size_t>(v, k); }},
      {"centroids_level1", [](RunConfig& c, const json& v, const std::string& k) { c.encoder.centroids_level1 = get_as<std::size_t>(v, k); }},
      {"centroids_level2", [](RunConfig& c, const json& v, const std::string& k) { c.encoder.centroids_level2 = get_as<std::size_t>(v, k); }},
      {"radius_level1", [](RunConfig& c, const json& v, const std::string& k) { c.encoder.radius_level1 = get_as<double>(v, k); }},
      {"radius_level2", [](RunConfig& c, const json& v, const std::string& k) { c.encoder.radius_level2 = get_as<double>(v, k); }},
      {"group_size_level1", [](RunConfig& c, const json& v, const std::string& k) { c.encoder.group_size_level1 = get_as<std::size_t>(v, k); }},
      {"group_size_level2", [](RunConfig& c, const json& v, const std::string& k) { c.encoder.group_size_level2 = get_as<std::size_t>(v, k); }},
      {"sa1_widths", [](RunConfig& c, const json& v, const std::string& k) { c.encoder.sa1_widths = get_widths(v, k); }},
      {"sa2_widths", [](RunConfig& c, const json& v, const std::string& k) { c.encoder.sa2_widths = get_widths(v, k); }},
      {"frame_feature_width", [](RunConfig& c, const json& v, const std::string& k) { c.encoder.frame_feature_width = get_as<std::size_t>(v, k); }},
      {"channel_attention", [](RunConfig& c, const json& v, const std::string& k) { c.encoder.channel_attention = get_as<bool>(v, k); }},
      {"ca_reduction", [](RunConfig& c, const json& v, const std::string& k) { c.encoder.ca_reduction = get_as<std::size_t>(v, k); }},
      {"voxel_size", [](RunConfig& c, const json& v, const std::string& k) { c.voxel_size = get_as<double>(v, k); }},
      // frame sampling
      {"sampling_mode", [](RunConfig& c, const json& v, const std::string& k) {
         const std::string s = get_as<std::string>(v, k);
         if (s == "ifs") c.sampling.mode = SamplingMode::Ifs;
         else if (s == "fixed_uniform") c.sampling.mode = SamplingMode::FixedUniform;
         else throw ConfigError("sampling_mode must be \"ifs\" or \"fixed_uniform\", got \"" + s + "\"");
       }},
      {"top_frame_rate", [](RunConfig& c, const json& v, const std::string& k) { c.sampling.top_frame_rate = get_as<std::size_t>(v, k); }},
      {"bottom_frame_rate", [](RunConfig& c, const json& v, const std::string& k) { c.sampling.bottom_frame_rate = get_as<std::size_t>(v, k); }},
      {"fixed_frames", [](RunConfig& c, const json& v, const std::string& k) { c.sampling.fixed_frames = get_as<std::size_t>(v, k); }},
      // aggregation
      {"two_stream", [](RunConfig& c, const json& v, const std::string& k) { c.split.two_stream = get_as<bool>(v, k); }},
      {"temporal_segments", [](RunConfig& c, const json& v, const std::string& k) { c.split.segments = get_as<std::size_t>(v, k); }},
      {"segment_frames", [](RunConfig& c, const json& v, const std::string& k) { c.split.segment_frames = get_as<std::size_t>(v, k); }},
      {"segment_overlap", [](RunConfig& c, const json& v, const std::string& k) { c.split.overlap = get_as<double>(v, k); }},
      {"partial_motion_literal", [](RunConfig& c, const json& v, const std::string& k) { c.split.partial_motion_literal = get_as<bool>(v, k); }},
      // transformer head
      {"transformer_enabled", [](RunConfig& c, const json& v, const std::string& k) { c.transformer.enabled = get_as<bool>(v, k); }},
      {"transformer_blocks", [](RunConfig& c, const json& v, const std::string& k) { c.transformer.blocks = get_as<std::size_t>(v, k); }},
      {"transformer_heads", [](RunConfig& c, const json& v, const std::string& k) { c.transformer.heads = get_as<std::size_t>(v, k); }},
      {"d_model", [](RunConfig& c, const json& v, const std::string& k) { c.transformer.d_model = get_as<std::size_t>(v, k); }},
      {"ffn_width", [](RunConfig& c, const json& v, const std::string& k) { c.transformer.ffn_width = get_as<std::size_t>(v, k); }},
      {"transformer_input", [](RunConfig& c, const json& v, const std::string& k) {
         const std::string s = get_as<std::string>(v, k);
         if (s == "multi_level") c.transformer.input = TransformerInput::MultiLevel;
         else if (s == "motion_only") c.transformer.input = TransformerInput::MotionOnly;
         else throw ConfigError("transformer_input must be \"multi_level\" or \"motion_only\", got \"" + s + "\"");
       }},
      {"transformer_output_agg", [](RunConfig& c, const json& v, const std::string& k) {
         const std::string s = get_as<std::string>(v, k);
         if (s == "mlp") c.transformer.output_aggregation = OutputAggregation::Mlp;
         else if (s == "maxpool") c.transformer.output_aggregation = OutputAggregation::MaxPool;
         else throw ConfigError("transformer_output_agg must be \"mlp\" or \"maxpool\", got \"" + s + "\"");
       }},
      {"num_classes", [](RunConfig& c, const json& v, const std::string& k) { c.transformer.num_classes = get_as<std::size_t>(v, k); }},
      // run
      {"epochs", [](RunConfig& c, const json& v, const std::string& k) { c.epochs = get_as<std::size_t>(v, k); }},
      {"batch_size", [](RunConfig& c, const json& v, const std::string& k) { c.batch_size = get_as<std::size_t>(v, k); }},
      {"lr", [](RunConfig& c, const json& v, const std::string& k) { c.lr = get_as<double>(v, k); }},
      {"lr_decay", [](RunConfig& c, const json& v, const std::string& k) { c.lr_decay = get_as<double>(v, k); }},
      {"lr_decay_every", [](RunConfig& c, const json& v, const std::string& k) { c.lr_decay_every = get_as<int>(v, k); }},
      {"seed", [](RunConfig& c, const json& v, const std::string& k) { c.seed = get_as<std::uint64_t>(v, k); }},
      {"dataset_seed", [](RunConfig& c, const json& v, const std::string& k) { c.dataset_seed = get_as<std::uint64_t>(v, k); }},
      {"augmentation", [](RunConfig& c, const json& v, const std::string& k) { c.augmentation = get_as<bool>(v, k); }},
      {"init", [](RunConfig& c, const json& v, const std::string& k) { c.init = get_as<std::string>(v, k); }},
      {"threads", [](RunConfig& c, const json& v, const std::string& k) { c.threads = get_as<std::size_t>(v, k); }},
      {"train_data", [](RunConfig& c, const json& v, const std::string& k) { c.train_data = get_as<std::string>(v, k); }},
      {"test_data", [](RunConfig& c, const json& v, const std::string& k) { c.test_data = get_as<std::string>(v, k); }},
      {"checkpoint", [](RunConfig& c, const json& v, const std::string& k) { c.checkpoint = get_as<std::string>(v, k); }},
      {"metrics", [](RunConfig& c, const json& v, const std::string& k) { c.metrics = get_as<std::string>(v, k); }},
  };
  return table;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void validate(const RunConfig& c) {
  const EncoderConfig& e = c.encoder;
  require(e.points_per_frame >= 1 && e.raw_points >= 1, "point counts must be positive");
  require(e.centroids_level1 >= 1 && e.centroids_level1 <= e.points_per_frame,
          "centroids_level1 must be in [1, points_per_frame]");
  require(e.centroids_level2 >= 1 && e.centroids_level2 <= e.centroids_level1,
          "centroids_level2 must be in [1, centroids_level1]");
  require(e.radius_level1 > 0.0 && e.radius_level2 > 0.0, "ball query radii must be positive");
  require(e.group_size_level1 >= 1 && e.group_size_level2 >= 1, "group sizes must be positive");
  for (std::size_t w : e.sa1_widths) require(w >= 1, "sa1_widths entries must be positive");
  for (std::size_t w : e.sa2_widths) require(w >= 1, "sa2_widths entries must be positive");
  require(e.frame_feature_width >= 2 && e.frame_feature_width % 2 == 0, "frame_feature_width (m3) must be even");
  require(e.ca_reduction >= 1 && e.level2_width() / e.ca_reduction >= 1,
          "ca_reduction must leave at least one hidden channel");
  require(c.voxel_size > 0.0, "voxel_size must be positive");

  const SamplingConfig& s = c.sampling;
  if (s.mode == SamplingMode::Ifs) {
    require(s.top_frame_rate >= 1 && s.bottom_frame_rate >= 1, "frame rates must be positive");
    require(s.bottom_frame_rate <= s.top_frame_rate, "bottom_frame_rate must not exceed top_frame_rate");
  } else {
    require(s.fixed_frames >= 1, "fixed_frames must be positive");
  }

  const SplitSpec& sp = c.split;
  if (sp.two_stream) {
    const std::size_t q = s.clip_frames();
    require(sp.segment_frames >= 1 && sp.segment_frames <= q, "segment_frames must be in [1, clip frames]");
    require(sp.overlap >= 0.0 && sp.overlap < 1.0, "segment_overlap must be in [0, 1)");
    const double stride = sp.segment_frames * (1.0 - sp.overlap);
    require(stride >= 1.0 && std::floor(stride) == stride, "segment_frames * (1 - segment_overlap) must be a whole number");
    const std::size_t count = (q - sp.segment_frames) / static_cast<std::size_t>(stride) + 1;
    if (sp.overlap == 0.0) {
      require(sp.segments * sp.segment_frames == q,
              "temporal_segments x segment_frames must equal the clip frame count " + std::to_string(q));
    } else {
      require(sp.segments == count, "temporal_segments must be " + std::to_string(count) + " for this overlap");
    }
  }

  const TransformerConfig& t = c.transformer;
  require(t.heads >= 1 && t.d_model >= 1 && t.d_model % t.heads == 0, "d_model must be divisible by transformer_heads");
  require(t.num_classes >= 2, "num_classes must be at least 2");

  require(c.epochs >= 1 && c.batch_size >= 1, "epochs and batch_size must be positive");
  require(c.lr > 0.0, "lr must be positive");
  require(c.lr_decay > 0.0 && c.lr_decay <= 1.0, "lr_decay must be in (0, 1]");
  require(c.lr_decay_every >= 1, "lr_decay_every must be positive");
  require(c.init == "fan_in_uniform", "init must be \"fan_in_uniform\"");
}

nlohmann::json to_json(const RunConfig& c) {
  json j;
  j["raw_points"] = c.encoder.raw_points;
  j["points_per_frame"] = c.encoder.points_per_frame;
  j["centroids_level1"] = c.encoder.centroids_level1;
  j["centroids_level2"] = c.encoder.centroids_level2;
  j["radius_level1"] = c.encoder.radius_level1;
  j["radius_level2"] = c.encoder.radius_level2;
  j["group_size_level1"] = c.encoder.group_size_level1;
  j["group_size_level2"] = c.encoder.group_size_level2;
  j["sa1_widths"] = c.encoder.sa1_widths;
  j["sa2_widths"] = c.encoder.sa2_widths;
  j["frame_feature_width"] = c.encoder.frame_feature_width;
  j["channel_attention"] = c.encoder.channel_attention;
  j["ca_reduction"] = c.encoder.ca_reduction;
  j["voxel_size"] = c.voxel_size;
  j["sampling_mode"] = sampling_name(c.sampling.mode);
  j["top_frame_rate"] = c.sampling.top_frame_rate;
  j["bottom_frame_rate"] = c.sampling.bottom_frame_rate;
  j["fixed_frames"] = c.sampling.fixed_frames;
  j["two_stream"] = c.split.two_stream;
  j["temporal_segments"] = c.split.segments;
  j["segment_frames"] = c.split.segment_frames;
  j["segment_overlap"] = c.split.overlap;
  j["partial_motion_literal"] = c.split.partial_motion_literal;
  j["transformer_enabled"] = c.transformer.enabled;
  j["transformer_blocks"] = c.transformer.blocks;
  j["transformer_heads"] = c.transformer.heads;
  j["d_model"] = c.transformer.d_model;
  j["ffn_width"] = c.transformer.ffn_width;
  j["transformer_input"] = input_name(c.transformer.input);
  j["transformer_output_agg"] = agg_name(c.transformer.output_aggregation);
  j["num_classes"] = c.transformer.num_classes;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["lr_decay"] = c.lr_decay;
  j["lr_decay_every"] = c.lr_decay_every;
  j["seed"] = c.seed;
  j["dataset_seed"] = c.dataset_seed;
  j["augmentation"] = c.augmentation;
  j["init"] = c.init;
  j["threads"] = c.threads;
  j["train_data"] = c.train_data;
  j["test_data"] = c.test_data;
  j["checkpoint"] = c.checkpoint;
  j["metrics"] = c.metrics;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key \"" + key + "\"");
    it->second(c, value, key);
  }
  validate(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << to_json(config).dump(2) << '\n';
}

RunConfig tiny_run_config() {
  RunConfig c;
  c.encoder.raw_points = 256;
  c.encoder.points_per_frame = 64;
  c.encoder.centroids_level1 = 16;
  c.encoder.centroids_level2 = 8;
  c.encoder.group_size_level1 = 8;
  c.encoder.group_size_level2 = 8;
  c.encoder.radius_level1 = 0.15;
  c.encoder.radius_level2 = 0.3;
  c.encoder.sa1_widths = {8};
  c.encoder.sa2_widths = {16};
  c.encoder.frame_feature_width = 16;
  c.transformer.d_model = 8;
  c.transformer.heads = 2;
  c.transformer.blocks = 1;
  c.transformer.num_classes = 6;
  return c;
}

}  // namespace tmdpt
