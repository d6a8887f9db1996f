#include "tmdpt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "tmdpt/checkpoint.hpp"
#include "tmdpt/errors.hpp"
#include "tmdpt/optim.hpp"
#include "tmdpt/parallel.hpp"

namespace tmdpt {

namespace {

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct SampleResult {
  double loss = 0.0;
  bool correct = false;
  std::vector<std::vector<double>> grads;  // indexed like the parameter list
};

}  // namespace

std::vector<EpochMetrics> train(TmdptModel& model, const Dataset& train_set, const Dataset* eval_set,
                                const RunConfig& config, const TrainOptions& options) {
  if (train_set.size() == 0) throw DataError("training set is empty");
  for (const PreparedVideo& v : train_set.videos) {
    if (v.label >= config.transformer.num_classes) throw DataError("training video " + v.source_id + " has no valid label");
  }
  const std::vector<Parameter*> params = model.parameters().all();
  std::unordered_map<const Parameter*, std::size_t> slot;
  for (std::size_t i = 0; i < params.size(); ++i) slot.emplace(params[i], i);
  Adam adam(params);
  const std::size_t threads = resolve_threads(config.threads);
  const auto start = std::chrono::steady_clock::now();

  std::vector<EpochMetrics> log;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = step_decay_lr(config.lr, config.lr_decay, config.lr_decay_every, static_cast<int>(epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, SeedStage::Shuffle, 0, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_id = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_id) {
      const std::size_t count = std::min(config.batch_size, order.size() - begin);
      std::vector<SampleResult> results(count);
      try {
        parallel_for(count, threads, [&](std::size_t i) {
          const PreparedVideo& video = train_set.videos[order[begin + i]];
          const auto plans = clip_plans(video, config, epoch, false, config.augmentation);
          Graph g;
          const Var logits = model.forward(g, plans).head.logits;
          const Var loss = cross_entropy(logits, video.label);
          SampleResult& r = results[i];
          r.loss = loss.value().item();
          r.correct = argmax(logits.value().data()) == video.label;
          g.backward(loss, true);
          r.grads.resize(params.size());
          g.for_each_param([&](const Parameter& p, std::span<const double> grad) {
            r.grads[slot.at(&p)].assign(grad.begin(), grad.end());
          });
        });
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_id) + ", lr " + std::to_string(lr) + ")");
      }

      adam.zero_grad();
      const double inv = 1.0 / static_cast<double>(count);
      for (const SampleResult& r : results) {
        loss_sum += r.loss;
        correct += r.correct ? 1 : 0;
        for (std::size_t k = 0; k < params.size(); ++k) {
          const auto& g = r.grads[k];
          if (g.empty()) continue;
          auto dst = params[k]->grad.data();
          for (std::size_t j = 0; j < g.size(); ++j) dst[j] += inv * g[j];
        }
      }
      for (const Parameter* p : params) {
        if (!p->grad.all_finite()) {
          throw NumericError("non-finite gradient in " + p->name + " (epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_id) + ", lr " + std::to_string(lr) + ")");
        }
      }
      adam.step(lr);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.train_loss = loss_sum / static_cast<double>(order.size());
    m.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    if (eval_set && options.evaluate_each_epoch) m.eval_acc = evaluate(model, *eval_set, config).accuracy;
    m.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.push_back(m);
    if (options.on_epoch) options.on_epoch(m);
  }
  return log;
}

EvalResult evaluate(const TmdptModel& model, const Dataset& data, const RunConfig& config) {
  const std::size_t classes = config.transformer.num_classes;
  EvalResult result;
  result.predictions.resize(data.size());
  parallel_for(data.size(), config.threads, [&](std::size_t i) {
    result.predictions[i] = predict(model, data.videos[i], config).label;
  });
  result.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t labeled = 0, hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::uint32_t truth = data.videos[i].label;
    if (truth >= classes) throw DataError("evaluation video " + data.videos[i].source_id + " has no valid label");
    ++result.confusion[truth][result.predictions[i]];
    ++labeled;
    hits += result.predictions[i] == truth ? 1 : 0;
  }
  result.accuracy = labeled ? static_cast<double>(hits) / static_cast<double>(labeled) : 0.0;
  result.per_class.assign(classes, -1.0);
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t total = std::accumulate(result.confusion[c].begin(), result.confusion[c].end(), std::size_t{0});
    if (total) result.per_class[c] = static_cast<double>(result.confusion[c][c]) / static_cast<double>(total);
  }
  return result;
}

Prediction predict(const TmdptModel& model, const PreparedVideo& video, const RunConfig& config) {
  const auto plans = clip_plans(video, config, 0, true);
  Prediction p;
  p.probabilities = model.probabilities(plans);
  p.label = argmax(p.probabilities);
  return p;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,lr,train_loss,train_acc,eval_acc,wall_clock\n";
  out.precision(10);
  for (const EpochMetrics& m : log) {
    out << m.epoch << ',' << m.lr << ',' << m.train_loss << ',' << m.train_acc << ',';
    if (m.eval_acc >= 0.0) out << m.eval_acc;
    out << ',' << m.wall_clock << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

std::filesystem::path config_sidecar(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".json";
  return p;
}

void save_model(const std::filesystem::path& checkpoint, const TmdptModel& model, const RunConfig& config) {
  save_checkpoint(checkpoint, model.parameters().snapshot());
  save_run_config(config_sidecar(checkpoint), config);
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  LoadedModel loaded;
  loaded.config = load_run_config(config_sidecar(checkpoint));
  validate(loaded.config);
  loaded.model = std::make_unique<TmdptModel>(loaded.config.model(), loaded.config.seed);
  loaded.model->parameters().restore(load_checkpoint(checkpoint));
  return loaded;
}

}  // namespace tmdpt
