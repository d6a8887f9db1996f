#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "tmdpt/ops.hpp"
#include "tmdpt/pointcloud_io.hpp"
#include "tmdpt/tensor.hpp"

namespace tmdpt::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& x : t.data()) x = d(rng);
  return t;
}

inline std::vector<Vec3> random_points(std::size_t n, std::mt19937_64& rng, double half = 1.0) {
  std::uniform_real_distribution<double> d(-half, half);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) p = {d(rng), d(rng), d(rng)};
  return pts;
}

using GraphFn = std::function<Var(Graph&, const std::vector<Var>&)>;

// Largest |a - n| / max(|a|, |n|, floor) over every input scalar, where a is the analytic
// gradient of sum(w * f(inputs)) for fixed random w and n is its central difference.
inline double max_gradient_error(std::vector<Tensor> inputs, const GraphFn& f, std::uint64_t seed = 7,
                                 double eps = 1e-5, double floor = 1e-3) {
  std::vector<Parameter> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    params.push_back({"p" + std::to_string(i), std::move(inputs[i]), {}});
  }
  std::mt19937_64 rng(seed);
  Tensor weights;
  auto loss_of = [&](Graph& g) {
    std::vector<Var> vars;
    for (Parameter& p : params) vars.push_back(g.param(p));
    Var out = f(g, vars);
    if (weights.empty()) weights = random_tensor(out.shape(), rng, 0.5, 1.5);
    return sum(mul(out, g.input(weights)));
  };
  Graph g;
  Var loss = loss_of(g);
  g.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (Parameter& p : params) {
    auto grad = g.grad(g.param(p));
    analytic.emplace_back(grad.begin(), grad.end());
    if (analytic.back().empty()) analytic.back().assign(p.value.numel(), 0.0);
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].value.numel(); ++i) {
      const double saved = params[k].value[i];
      params[k].value[i] = saved + eps;
      Graph gp;
      const double up = loss_of(gp).value().item();
      params[k].value[i] = saved - eps;
      Graph gm;
      const double down = loss_of(gm).value().item();
      params[k].value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor}));
    }
  }
  return worst;
}

}  // namespace tmdpt::testing
