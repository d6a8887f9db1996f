#include "tmdpt/graph.hpp"

#include <algorithm>

#include "tmdpt/errors.hpp"

namespace tmdpt {

std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::Input: return "input";
    case OpKind::Param: return "param";
    case OpKind::MatMul: return "matmul";
    case OpKind::Affine: return "affine";
    case OpKind::Transpose: return "transpose";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::AddBias: return "add_bias";
    case OpKind::Relu: return "relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Reshape: return "reshape";
    case OpKind::GatherRows: return "gather_rows";
    case OpKind::MaxReduce: return "max_reduce";
    case OpKind::MeanReduce: return "mean_reduce";
    case OpKind::Sum: return "sum";
    case OpKind::SegmentMax: return "segment_max";
    case OpKind::SegmentWeightedSum: return "segment_weighted_sum";
    case OpKind::ScaleChannels: return "scale_channels";
    case OpKind::SoftmaxRows: return "softmax_rows";
    case OpKind::LayerNorm: return "layer_norm";
    case OpKind::CrossEntropy: return "cross_entropy";
  }
  return "unknown";
}

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::input(Tensor value) {
  if (!value.all_finite()) throw NumericError("non-finite value in graph input");
  Node node;
  node.op = OpKind::Input;
  node.value = std::move(value);
  return push(std::move(node));
}

Var Graph::param(Parameter& p) {
  if (auto it = param_index_.find(&p); it != param_index_.end()) return Var(this, it->second);
  Node node;
  node.op = OpKind::Param;
  node.param = &p;
  node.requires_grad = true;
  Var v = push(std::move(node));
  param_index_.emplace(&p, v.id());
  param_nodes_.emplace_back(&p, v.id());
  return v;
}

Var Graph::emit(OpKind op, std::initializer_list<Var> inputs, Tensor value, BackwardFn backward) {
  return emit(op, std::vector<Var>(inputs), std::move(value), std::move(backward));
}

Var Graph::emit(OpKind op, const std::vector<Var>& inputs, Tensor value, BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by " + std::string(op_name(op)));
  }
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (in.graph() != this) throw ContractError("op input belongs to a different graph");
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  return push(std::move(node));
}

const Tensor& Graph::value(std::uint32_t id) const {
  const Node& node = nodes_[id];
  return node.param ? node.param->value : node.value;
}

std::span<double> Graph::grad_mut(std::uint32_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(value(id).numel(), 0.0);
  return node.grad;
}

void Graph::backward(Var loss, bool release) {
  if (loss.graph() != this) throw ContractError("loss belongs to a different graph");
  if (value(loss.id()).numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_str(value(loss.id()).shape()));
  }
  for (Node& node : nodes_) node.grad.clear();
  if (!nodes_[loss.id()].requires_grad) return;
  grad_mut(loss.id())[0] = 1.0;
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.backward) node.backward(*this, id);
    if (release && !node.param) {
      node.grad = {};
      node.value = {};
    }
  }
}

void Graph::accumulate_param_grads(double scale) const {
  for (const auto& [param, id] : param_nodes_) {
    const auto& g = nodes_[id].grad;
    if (g.empty()) continue;
    if (param->grad.numel() != param->value.numel()) param->grad = Tensor(param->value.shape());
    auto dst = param->grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += scale * g[i];
  }
}

}  // namespace tmdpt
