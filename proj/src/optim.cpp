#include "tmdpt/optim.hpp"

#include <cmath>

#include "tmdpt/errors.hpp"

namespace tmdpt {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr) {
  if (params.size() != grads.size()) throw DimensionError("adam_step: parameter and gradient lengths differ");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: moment buffers do not match parameter length");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

Adam::Adam(std::vector<Parameter*> params, double beta1, double beta2, double eps) : params_(std::move(params)) {
  states_.resize(params_.size());
  for (AdamState& s : states_) {
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
  }
}

void Adam::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (p.grad.numel() != p.value.numel()) p.grad = Tensor(p.value.shape());
    adam_step(p.value.data(), p.grad.data(), states_[i], lr);
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) {
    if (p->grad.numel() != p->value.numel()) {
      p->grad = Tensor(p->value.shape());
    } else {
      for (double& g : p->grad.data()) g = 0.0;
    }
  }
}

double step_decay_lr(double base, double factor, int every, int epoch) {
  if (every <= 0) return base;
  return base * std::pow(factor, epoch / every);
}

}  // namespace tmdpt
