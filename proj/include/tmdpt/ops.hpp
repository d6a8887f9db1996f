#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tmdpt/graph.hpp"

namespace tmdpt {

// Differentiable tensor operations recorded on the graph of their inputs.
// All shapes are checked; mismatches throw DimensionError.

Var matmul(Var a, Var b);                 // [r,k] x [k,c] -> [r,c]
Var affine(Var x, Var w, Var b);          // x*w + b broadcast over rows
Var transpose(Var a);                     // rank-2 only
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                    // elementwise
Var scale(Var a, double s);
Var add_bias(Var a, Var bias);            // bias length == last extent
Var relu(Var a);                          // relu'(0) = 0
Var sigmoid(Var a);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var reshape(Var a, Shape shape);
Var gather_rows(Var a, std::vector<std::uint32_t> rows);

struct MaxReduced {
  Var values;
  std::vector<std::size_t> argmax;  // position along the reduced axis, per output element
};
// Maximum along an axis; ties resolve to the lowest index and the gradient flows only
// to the selected element.
MaxReduced max_reduce_with_argmax(Var a, std::size_t axis);
Var max_reduce(Var a, std::size_t axis);
Var mean_reduce(Var a, std::size_t axis);
Var sum(Var a);

// Row-segment reductions over a [rows, d] matrix. offsets has one entry per segment
// plus a terminal entry equal to rows; every segment must be nonempty.
Var segment_max(Var a, std::span<const std::uint32_t> offsets);
Var segment_weighted_sum(Var a, std::span<const std::uint32_t> offsets, std::span<const double> weights);

// x: [g, k, d], gate: [g, d] -> x[i, j, c] * gate[i, c]
Var scale_channels(Var x, Var gate);

Var softmax_rows(Var a);
Var layer_norm(Var a, Var gamma, Var beta, double eps = 1e-5);
// logits of shape [C] or [1, C]; returns -log softmax(logits)[label].
Var cross_entropy(Var logits, std::size_t label);

// Plain (non-recorded) softmax of a vector, used by prediction paths.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace tmdpt
