#include "tmdpt/params.hpp"

#include <cmath>

#include "tmdpt/errors.hpp"
#include "tmdpt/ops.hpp"

namespace tmdpt {

Parameter& ParameterStore::add(std::string name, Tensor value) {
  if (find(name)) throw ContractError("duplicate parameter name " + name);
  Tensor grad(value.shape());
  params_.push_back(Parameter{std::move(name), std::move(value), std::move(grad)});
  return params_.back();
}

Parameter* ParameterStore::find(std::string_view name) {
  for (Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Parameter* ParameterStore::find(std::string_view name) const {
  for (const Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (Parameter& p : params_) {
    for (double& g : p.grad.data()) g = 0.0;
  }
}

NamedTensors ParameterStore::snapshot() const {
  NamedTensors out;
  out.reserve(params_.size());
  for (const Parameter& p : params_) out.emplace_back(p.name, p.value);
  return out;
}

void ParameterStore::restore(const NamedTensors& tensors) {
  if (tensors.size() != params_.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(tensors.size()) + " tensors but the configured model has " +
                      std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& [name, value] = tensors[i];
    Parameter& p = params_[i];
    if (p.name != name || p.value.shape() != value.shape()) {
      throw ConfigError("checkpoint tensor " + name + " " + shape_str(value.shape()) +
                        " does not match model parameter " + p.name + " " + shape_str(p.value.shape()));
    }
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) params_[i].value = tensors[i].second;
}

Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& x : t.data()) x = dist(rng);
  return t;
}

Var Linear::operator()(Graph& g, Var x) const {
  if (bias) return affine(x, g.param(*weight), g.param(*bias));
  return matmul(x, g.param(*weight));
}

Linear make_linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                   bool with_bias) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = &store.add(name + ".w", fan_in_uniform({in, out}, in, rng));
  if (with_bias) l.bias = &store.add(name + ".b", fan_in_uniform({out}, in, rng));
  return l;
}

}  // namespace tmdpt
