#pragma once

#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "tmdpt/checkpoint.hpp"
#include "tmdpt/graph.hpp"
#include "tmdpt/random.hpp"

namespace tmdpt {

// Owns named parameters with stable addresses, in creation order.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter& add(std::string name, Tensor value);
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::vector<Parameter*> all();
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

  NamedTensors snapshot() const;
  // Replaces every value; names and shapes must match exactly.
  void restore(const NamedTensors& tensors);

 private:
  std::deque<Parameter> params_;
};

// Fan-in scaled uniform initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng);

struct Linear {
  Parameter* weight = nullptr;  // [in, out]
  Parameter* bias = nullptr;    // [out], optional
  std::size_t in = 0;
  std::size_t out = 0;

  Var operator()(Graph& g, Var x) const;
};

Linear make_linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                   bool with_bias = true);

}  // namespace tmdpt
