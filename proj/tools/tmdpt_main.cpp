// tmdpt command line: synthetic data, depth conversion, training, evaluation, prediction
// and gradient checking.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "tmdpt/errors.hpp"
#include "tmdpt/gradcheck.hpp"
#include "tmdpt/pointcloud_io.hpp"
#include "tmdpt/synthetic.hpp"
#include "tmdpt/trainer.hpp"

namespace fs = std::filesystem;
using namespace tmdpt;

namespace {

enum Exit { kOk = 0, kFailed = 1, kConfig = 2, kData = 3, kNumeric = 4 };

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

int run_synth(const std::string& spec_path, std::uint64_t seed, const std::string& out) {
  const SyntheticSpec spec = spec_path.empty() ? SyntheticSpec{} : synthetic_spec_from_json(read_json(spec_path));
  const auto entries = generate_synthetic_dataset(spec, seed, out);
  std::printf("wrote %zu videos and manifest.jsonl to %s\n", entries.size(), out.c_str());
  return kOk;
}

int run_convert(const std::string& in_dir, const std::string& out, double voxel, long label) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".dep") files.push_back(entry.path());
  }
  if (files.empty()) throw DataError("no .dep files in " + in_dir);
  std::sort(files.begin(), files.end());
  PointCloudVideo video;
  for (const fs::path& f : files) video.frames.push_back(depth_to_points(read_depth_frame(f)));
  video = normalize_video(video);
  for (auto& frame : video.frames) frame = voxel_occupancy(frame, voxel);
  if (label >= 0) video.label = static_cast<std::uint32_t>(label);
  write_pcv(out, video);
  std::printf("converted %zu depth frames to %s\n", files.size(), out.c_str());
  return kOk;
}

void print_eval(const EvalResult& r) {
  std::printf("accuracy %.6f\n", r.accuracy);
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    if (r.per_class[c] < 0.0) std::printf("class %zu  n/a\n", c);
    else std::printf("class %zu  %.6f\n", c, r.per_class[c]);
  }
  std::printf("confusion (rows = true class)\n");
  for (const auto& row : r.confusion) {
    for (std::size_t v : row) std::printf(" %5zu", v);
    std::printf("\n");
  }
}

int run_train(const std::string& config_path) {
  RunConfig config = load_run_config(config_path);
  validate(config);
  if (config.train_data.empty()) throw ConfigError("train_data is not set");
  const Dataset train_set = load_dataset(config.train_data, config, config.threads);
  Dataset test_set;
  if (!config.test_data.empty()) test_set = load_dataset(config.test_data, config, config.threads);
  TmdptModel model(config.model(), config.seed);
  std::printf("model parameters %zu, train videos %zu, test videos %zu\n", model.parameter_count(), train_set.size(),
              test_set.size());
  TrainOptions options;
  options.on_epoch = [](const EpochMetrics& m) {
    std::printf("epoch %3zu  lr %.6f  loss %.5f  train_acc %.4f", m.epoch, m.lr, m.train_loss, m.train_acc);
    if (m.eval_acc >= 0.0) std::printf("  eval_acc %.4f", m.eval_acc);
    std::printf("  %.1fs\n", m.wall_clock);
    std::fflush(stdout);
  };
  const auto log = train(model, train_set, test_set.size() ? &test_set : nullptr, config, options);
  write_metrics_csv(config.metrics, log);
  save_model(config.checkpoint, model, config);
  std::printf("saved %s and %s\n", config.checkpoint.c_str(), config_sidecar(config.checkpoint).string().c_str());
  return kOk;
}

int run_eval(const std::string& ckpt, const std::string& data_dir) {
  const LoadedModel loaded = load_model(ckpt);
  const Dataset data = load_dataset(data_dir, loaded.config, loaded.config.threads);
  print_eval(evaluate(*loaded.model, data, loaded.config));
  return kOk;
}

int run_predict(const std::string& ckpt, const std::string& input) {
  const LoadedModel loaded = load_model(ckpt);
  const PreparedVideo video = prepare_video(read_pcv(input), loaded.config);
  const Prediction p = predict(*loaded.model, video, loaded.config);
  std::printf("class %zu\n", p.label);
  for (std::size_t c = 0; c < p.probabilities.size(); ++c) std::printf("p[%zu] %.9f\n", c, p.probabilities[c]);
  return kOk;
}

int run_gradcheck(const std::string& config_path, std::size_t samples, std::uint64_t seed, double tolerance) {
  const RunConfig config = config_path.empty() ? tiny_run_config() : load_run_config(config_path);
  GradCheckOptions options;
  options.samples = samples;
  options.seed = seed;
  const GradCheckReport report = gradcheck(config, options);
  std::fputs(format_report(report).c_str(), stdout);
  const bool pass = report.max_rel_err < tolerance;
  std::printf("%s: max relative error %.3e %s %.1e\n", pass ? "PASS" : "FAIL", report.max_rel_err, pass ? "<" : ">=",
              tolerance);
  return pass ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-person interaction recognition on point-cloud videos"};
  app.require_subcommand(1);

  std::string spec_path, out_dir;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "generate a synthetic two-person interaction dataset");
  synth->add_option("--spec", spec_path, "synthetic spec JSON (defaults when omitted)");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", out_dir, "output directory")->required();

  std::string depth_dir, pcv_out;
  double voxel = 0.05;
  long label = -1;
  auto* convert = app.add_subcommand("convert", "convert a directory of .dep depth frames to one .pcv video");
  convert->add_option("--in", depth_dir, "directory of .dep files, frame order = file name order")->required();
  convert->add_option("--out", pcv_out, "output .pcv path")->required();
  convert->add_option("--voxel", voxel, "voxel size in normalized units")->check(CLI::PositiveNumber);
  convert->add_option("--label", label, "class id to store in the file");

  std::string train_config;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--config", train_config, "run config JSON")->required();

  std::string ckpt, data_dir, input;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset directory");
  eval->add_option("--ckpt", ckpt, "checkpoint path")->required();
  eval->add_option("--data", data_dir, "dataset directory with manifest.jsonl")->required();

  auto* predict_cmd = app.add_subcommand("predict", "classify one .pcv video");
  predict_cmd->add_option("--ckpt", ckpt, "checkpoint path")->required();
  predict_cmd->add_option("--in", input, ".pcv file")->required();

  std::string gc_config;
  std::size_t gc_samples = 20;
  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients of the full loss");
  gc->add_option("--config", gc_config, "run config JSON (built-in tiny config when omitted)");
  gc->add_option("--samples", gc_samples, "number of sampled parameter scalars");
  gc->add_option("--seed", gc_seed, "sampling seed");
  gc->add_option("--tol", gc_tol, "maximum accepted relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*synth) return run_synth(spec_path, synth_seed, out_dir);
    if (*convert) return run_convert(depth_dir, pcv_out, voxel, label);
    if (*train_cmd) return run_train(train_config);
    if (*eval) return run_eval(ckpt, data_dir);
    if (*predict_cmd) return run_predict(ckpt, input);
    if (*gc) return run_gradcheck(gc_config, gc_samples, gc_seed, gc_tol);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ContractError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kFailed;
}
