#include "tmdpt/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "tmdpt/dataset.hpp"
#include "tmdpt/model.hpp"
#include "tmdpt/random.hpp"
#include "tmdpt/synthetic.hpp"

namespace tmdpt {

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckReport gradcheck(const RunConfig& config, const GradCheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  validate(config);
  TmdptModel model(config.model(), derive_seed(options.seed, SeedStage::GradCheck, 1));

  SyntheticSpec spec;
  spec.num_classes = std::min<std::size_t>(config.transformer.num_classes, synthetic_class_names().size());
  spec.frames = std::max<std::size_t>(config.sampling.pool_frames(), 2);
  const std::uint32_t label = static_cast<std::uint32_t>(options.seed % spec.num_classes);
  PointCloudVideo video = generate_synthetic_video(spec, derive_seed(options.seed, SeedStage::GradCheck, 2), label, 0);
  video.source_id = "gradcheck";
  const PreparedVideo prepared = prepare_video(video, config);
  const auto plans = clip_plans(prepared, config, 0, true);

  auto loss_value = [&] {
    Graph g;
    return model.loss(g, plans, label).value().item();
  };

  std::vector<Parameter*> params = model.parameters().all();
  std::unordered_map<const Parameter*, std::vector<double>> analytic;
  GradCheckReport report;
  {
    Graph g;
    Var loss = model.loss(g, plans, label);
    report.loss = loss.value().item();
    g.backward(loss);
    g.for_each_param([&](const Parameter& p, std::span<const double> grad) {
      analytic[&p].assign(grad.begin(), grad.end());
    });
  }
  report.parameter_tensors = params.size();
  report.parameter_scalars = model.parameter_count();

  // One scalar from every tensor, preferring ones the loss actually depends on, then
  // uniform draws over all scalars.
  Rng rng(derive_seed(options.seed, SeedStage::GradCheck, 3));
  std::vector<std::pair<std::size_t, std::size_t>> picks;
  for (std::size_t t = 0; t < params.size(); ++t) {
    std::vector<std::size_t> live;
    if (const auto it = analytic.find(params[t]); it != analytic.end()) {
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        if (it->second[i] != 0.0) live.push_back(i);
      }
    }
    if (live.empty()) {
      picks.emplace_back(t, std::uniform_int_distribution<std::size_t>(0, params[t]->value.numel() - 1)(rng));
    } else {
      picks.emplace_back(t, live[std::uniform_int_distribution<std::size_t>(0, live.size() - 1)(rng)]);
    }
  }
  std::uniform_int_distribution<std::size_t> flat(0, report.parameter_scalars - 1);
  while (picks.size() < options.samples) {
    std::size_t k = flat(rng), t = 0;
    while (k >= params[t]->value.numel()) k -= params[t++]->value.numel();
    picks.emplace_back(t, k);
  }

  for (const auto& [t, k] : picks) {
    Parameter& p = *params[t];
    const double saved = p.value[k];
    p.value[k] = saved + options.eps;
    const double up = loss_value();
    p.value[k] = saved - options.eps;
    const double down = loss_value();
    p.value[k] = saved;
    GradCheckEntry e;
    e.name = p.name;
    e.index = k;
    const auto it = analytic.find(&p);
    e.analytic = it == analytic.end() || it->second.empty() ? 0.0 : it->second[k];
    e.numeric = (up - down) / (2.0 * options.eps);
    e.rel_err = relative_error(e.analytic, e.numeric, options.denominator_floor);
    report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
    report.entries.push_back(std::move(e));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string format_report(const GradCheckReport& r) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %7s %16s %16s %10s\n", "parameter", "index", "analytic", "numeric", "rel_err");
  out += line;
  for (const GradCheckEntry& e : r.entries) {
    std::snprintf(line, sizeof line, "%-28s %7zu %16.9e %16.9e %10.3e\n", e.name.c_str(), e.index, e.analytic, e.numeric,
                  e.rel_err);
    out += line;
  }
  std::snprintf(line, sizeof line, "entries %zu  tensors %zu  scalars %zu  loss %.9f  max_rel_err %.3e  %.2fs\n",
                r.entries.size(), r.parameter_tensors, r.parameter_scalars, r.loss, r.max_rel_err, r.seconds);
  out += line;
  return out;
}

}  // namespace tmdpt
