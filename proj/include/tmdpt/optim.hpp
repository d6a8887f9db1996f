#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tmdpt/tensor.hpp"

namespace tmdpt {

struct AdamState {
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update in place. Moment buffers are sized on first use.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr);

// Adam over a fixed list of parameters, consuming Parameter::grad.
class Adam {
 public:
  explicit Adam(std::vector<Parameter*> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(double lr);
  void zero_grad();
  std::uint64_t steps() const { return states_.empty() ? 0 : states_.front().step; }

 private:
  std::vector<Parameter*> params_;
  std::vector<AdamState> states_;
};

// Step schedule: base * factor^(floor(epoch / every)).
double step_decay_lr(double base, double factor, int every, int epoch);

}  // namespace tmdpt
