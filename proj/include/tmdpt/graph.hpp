#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tmdpt/tensor.hpp"

namespace tmdpt {

enum class OpKind : std::uint8_t {
  Input,
  Param,
  MatMul,
  Affine,
  Transpose,
  Add,
  Sub,
  Mul,
  Scale,
  AddBias,
  Relu,
  Sigmoid,
  Concat,
  Slice,
  Reshape,
  GatherRows,
  MaxReduce,
  MeanReduce,
  Sum,
  SegmentMax,
  SegmentWeightedSum,
  ScaleChannels,
  SoftmaxRows,
  LayerNorm,
  CrossEntropy,
};

std::string_view op_name(OpKind op);

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::uint32_t id() const { return id_; }
  Graph* graph() const { return graph_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

// Tape of operations recorded in execution order. Nodes are appended only, so every
// input id precedes its consumer and reverse insertion order is a valid reverse
// topological order.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::uint32_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Constant leaf; never receives a gradient.
  Var input(Tensor value);
  // Leaf bound to a parameter. Binding the same parameter twice returns the same node.
  Var param(Parameter& p);

  // Appends an op node. Used by op implementations; validates that the value is finite.
  Var emit(OpKind op, std::initializer_list<Var> inputs, Tensor value, BackwardFn backward);
  Var emit(OpKind op, const std::vector<Var>& inputs, Tensor value, BackwardFn backward);

  // Reverse-mode sweep from a single-element loss. With release=true, intermediate
  // values and gradients are freed as soon as they are no longer needed; only leaf
  // gradients stay readable afterwards.
  void backward(Var loss, bool release = false);

  const Tensor& value(std::uint32_t id) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  OpKind op(std::uint32_t id) const { return nodes_[id].op; }
  std::span<const std::uint32_t> inputs(std::uint32_t id) const { return nodes_[id].inputs; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient of the last backward() with respect to the node; empty if none reached it.
  std::span<const double> grad(Var v) const { return nodes_[v.id()].grad; }
  std::span<const double> grad(std::uint32_t id) const { return nodes_[id].grad; }
  // Zero-initialized on first access.
  std::span<double> grad_mut(std::uint32_t id);

  // Adds scale * d(loss)/d(param) into Parameter::grad for every bound parameter.
  void accumulate_param_grads(double scale = 1.0) const;

  template <typename F>
  void for_each_param(F&& f) const {
    for (const auto& [param, id] : param_nodes_) f(*param, std::span<const double>(nodes_[id].grad));
  }

 private:
  struct Node {
    OpKind op = OpKind::Input;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    Parameter* param = nullptr;
    bool requires_grad = false;
    std::vector<double> grad;
    BackwardFn backward;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::vector<std::pair<Parameter*, std::uint32_t>> param_nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> param_index_;
};

inline const Tensor& Var::value() const { return graph_->value(id_); }

}  // namespace tmdpt
