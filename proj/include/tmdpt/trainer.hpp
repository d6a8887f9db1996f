#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "tmdpt/config.hpp"
#include "tmdpt/dataset.hpp"
#include "tmdpt/model.hpp"

namespace tmdpt {

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double eval_acc = -1.0;  // -1 when no evaluation set is given
  double wall_clock = 0.0;  // seconds since training started
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<double> per_class;                     // -1 for classes without samples
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<std::size_t> predictions;
};

struct TrainOptions {
  bool evaluate_each_epoch = true;
  std::function<void(const EpochMetrics&)> on_epoch;
};

// One epoch: IFS Step II per sample, mini-batches in a seeded shuffle, Adam on the batch
// mean of the loss. Gradients are computed per sample in parallel and summed in sample
// order, so results do not depend on the thread count.
std::vector<EpochMetrics> train(TmdptModel& model, const Dataset& train_set, const Dataset* eval_set,
                                const RunConfig& config, const TrainOptions& options = {});

EvalResult evaluate(const TmdptModel& model, const Dataset& data, const RunConfig& config);

struct Prediction {
  std::size_t label = 0;
  std::vector<double> probabilities;
};

Prediction predict(const TmdptModel& model, const PreparedVideo& video, const RunConfig& config);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& log);

// Parameters go to the checkpoint, the run config to <checkpoint>.json beside it.
void save_model(const std::filesystem::path& checkpoint, const TmdptModel& model, const RunConfig& config);

struct LoadedModel {
  RunConfig config;
  std::unique_ptr<TmdptModel> model;
};

LoadedModel load_model(const std::filesystem::path& checkpoint);
std::filesystem::path config_sidecar(const std::filesystem::path& checkpoint);

}  // namespace tmdpt
