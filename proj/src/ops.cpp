#include "tmdpt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "tmdpt/errors.hpp"

namespace tmdpt {
namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + " expects a rank-2 tensor, got " + shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// Splits a shape around an axis into (outer, extent, inner) for strided loops.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

void accumulate(Graph& g, std::uint32_t id, std::span<const double> delta) {
  if (!g.requires_grad(id)) return;
  auto dst = g.grad_mut(id);
  for (std::size_t i = 0; i < delta.size(); ++i) dst[i] += delta[i];
}

// c (+)= a[m,k] * b[k,n]. Every output row goes through the same k-ordered multiply-add
// sequence, so a row's result does not depend on its position or on the row count.
// Library GEMMs route tail rows through different kernels, which would make a frame's
// features depend on where it sits in a stacked batch.
void product(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* c0 = c + i * n;
    double* c1 = c0 + n;
    double* c2 = c1 + n;
    double* c3 = c2 + n;
    const double* a0 = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      const double x0 = a0[p], x1 = a0[k + p], x2 = a0[2 * k + p], x3 = a0[3 * k + p];
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = bp[j];
        c0[j] += x0 * bv;
        c1[j] += x1 * bv;
        c2[j] += x2 * bv;
        c3[j] += x3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    double* c0 = c + i * n;
    const double* a0 = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      const double x0 = a0[p];
      for (std::size_t j = 0; j < n; ++j) c0[j] += x0 * bp[j];
    }
  }
}

void transpose_into(const double* a, double* out, std::size_t r, std::size_t c) {
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  }
}

// da[m,k] += dc[m,n] * b[k,n]^T
void accumulate_input_grad(std::span<const double> dc, std::span<const double> b, std::span<double> da,
                           std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> bt(k * n);
  transpose_into(b.data(), bt.data(), k, n);
  product(dc.data(), bt.data(), da.data(), m, n, k, true);
}

// db[k,n] += a[m,k]^T * dc[m,n], summed over rows in order.
void accumulate_weight_grad(std::span<const double> a, std::span<const double> dc, std::span<double> db,
                            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t r = 0; r < m; ++r) {
    const double* ar = a.data() + r * k;
    const double* dr = dc.data() + r * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double x = ar[p];
      double* out = db.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) out[j] += x * dr[j];
    }
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank2(A, "matmul");
  require_rank2(B, "matmul");
  if (A.cols() != B.rows()) {
    throw DimensionError("matmul: inner extents differ " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
  }
  const std::size_t r = A.rows(), k = A.cols(), c = B.cols();
  Tensor out({r, c});
  product(A.data().data(), B.data().data(), out.data().data(), r, k, c, false);
  return a.graph()->emit(OpKind::MatMul, {a, b}, std::move(out), [r, k, c](Graph& g, std::uint32_t self) {
    const auto in = g.inputs(self);
    const auto dC = g.grad(self);
    if (g.requires_grad(in[0])) accumulate_input_grad(dC, g.value(in[1]).data(), g.grad_mut(in[0]), r, k, c);
    if (g.requires_grad(in[1])) accumulate_weight_grad(g.value(in[0]).data(), dC, g.grad_mut(in[1]), r, k, c);
  });
}

Var affine(Var x, Var w, Var b) {
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  const Tensor& B = b.value();
  require_rank2(X, "affine");
  require_rank2(W, "affine");
  if (X.cols() != W.rows() || B.numel() != W.cols()) {
    throw DimensionError("affine: incompatible shapes " + shape_str(X.shape()) + ", " + shape_str(W.shape()) +
                         ", " + shape_str(B.shape()));
  }
  const std::size_t r = X.rows(), k = X.cols(), c = W.cols();
  Tensor out({r, c});
  product(X.data().data(), W.data().data(), out.data().data(), r, k, c, false);
  const auto bias = B.data();
  auto od = out.data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) od[i * c + j] += bias[j];
  }
  return x.graph()->emit(OpKind::Affine, {x, w, b}, std::move(out), [r, k, c](Graph& g, std::uint32_t self) {
    const auto in = g.inputs(self);
    const auto dY = g.grad(self);
    if (g.requires_grad(in[0])) accumulate_input_grad(dY, g.value(in[1]).data(), g.grad_mut(in[0]), r, k, c);
    if (g.requires_grad(in[1])) accumulate_weight_grad(g.value(in[0]).data(), dY, g.grad_mut(in[1]), r, k, c);
    if (g.requires_grad(in[2])) {
      auto db = g.grad_mut(in[2]);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) db[j] += dY[i * c + j];
      }
    }
  });
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  require_rank2(A, "transpose");
  const std::size_t r = A.rows(), c = A.cols();
  Tensor out({c, r});
  transpose_into(A.data().data(), out.data().data(), r, c);
  return a.graph()->emit(OpKind::Transpose, {a}, std::move(out), [r, c](Graph& g, std::uint32_t self) {
    const auto in = g.inputs(self);
    const auto dT = g.grad(self);
    auto dA = g.grad_mut(in[0]);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) dA[i * c + j] += dT[j * r + i];
    }
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const auto bd = b.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
  return a.graph()->emit(OpKind::Add, {a, b}, std::move(out), [](Graph& g, std::uint32_t self) {
    const auto in = g.inputs(self);
    accumulate(g, in[0], g.grad(self));
    accumulate(g, in[1], g.grad(self));
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const auto bd = b.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] -= bd[i];
  return a.graph()->emit(OpKind::Sub, {a, b}, std::move(out), [](Graph& g, std::uint32_t self) {
    const auto in = g.inputs(self);
    accumulate(g, in[0], g.grad(self));
    if (g.requires_grad(in[1])) {
      auto dst = g.grad_mut(in[1]);
      const auto gy = g.grad(self);
      for (std::size_t i = 0; i < gy.size(); ++i) dst[i] -= gy[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const auto bd = b.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bd[i];
  return a.graph()->emit(OpKind::Mul, {a, b}, std::move(out), [](Graph& g, std::uint32_t self) {
    const auto in = g.inputs(self);
    const auto gy = g.grad(self);
    for (int side = 0; side < 2; ++side) {
      if (!g.requires_grad(in[side])) continue;
      const auto other = g.value(in[1 - side]).data();
      auto dst = g.grad_mut(in[side]);
      for (std::size_t i = 0; i < gy.size(); ++i) dst[i] += gy[i] * other[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& x : out.data()) x *= s;
  return a.graph()->emit(OpKind::Scale, {a}, std::move(out), [s](Graph& g, std::uint32_t self) {
    const auto in = g.inputs(self);
    const auto gy = g.grad(self);
    auto dst = g.grad_mut(in[0]);
    for (std::size_t i = 0; i < gy.size(); ++i) dst[i] += s * gy[i];
  });
}

Var add_bias(Var a, Var bias) {
  const Tensor& A = a.value();
  const std::size_t c = A.shape().back();
  if (bias.value().numel() != c) {
    throw DimensionError("add_bias: bias " + shape_str(bias.value().shape()) + " vs " + shape_str(A.shape()));
  }
  Tensor out = A;
  const auto bd = bias.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i % c];
  return a.graph()->emit(OpKind::AddBias, {a, bias}, std::move(out), [c](Graph& g, std::uint32_t self) {
    const auto in = g.inputs(self);
    const auto gy = g.grad(self);
    accumulate(g, in[0], gy);
    if (g.requires_grad(in[1])) {
      auto db = g.grad_mut(in[1]);
      for (std::size_t i = 0; i < gy.size(); ++i) db[i % c] += gy[i];
    }
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
  return a.graph()->emit(OpKind::Relu, {a}, std::move(out), [](Graph& g, std::uint32_t self) {
    const auto in = g.inputs(self);
    const auto y = g.value(self).data();
    const auto gy = g.grad(self);
    auto dst = g.grad_mut(in[0]);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      if (y[i] > 0.0) dst[i] += gy[i];
    }
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& x : out.data()) x = 1.0 / (1.0 + std::exp(-x));
  return a.graph()->emit(OpKind::Sigmoid, {a}, std::move(out), [](Graph& g, std::uint32_t self) {
    const auto in = g.inputs(self);
    const auto y = g.value(self).data();
    const auto gy = g.grad(self);
    auto dst = g.grad_mut(in[0]);
    for (std::size_t i = 0; i < gy.size(); ++i) dst[i] += gy[i] * y[i] * (1.0 - y[i]);
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw DimensionError("concat axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> extents;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw DimensionError("concat rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw DimensionError("concat: shape mismatch " + shape_str(s) + " vs " + shape_str(first));
      }
    }
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisSplit split = split_axis(out_shape, axis);
  Tensor out(out_shape);
  auto od = out.data();
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto src = parts[p].value().data();
    const std::size_t block = extents[p] * split.inner;
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(src.begin() + o * block, block, od.begin() + o * split.extent * split.inner + offset);
    }
    offset += block;
  }
  return parts.front().graph()->emit(
      OpKind::Concat, parts, std::move(out), [split, extents](Graph& g, std::uint32_t self) {
        const auto in = g.inputs(self);
        const auto gy = g.grad(self);
        std::size_t offset = 0;
        for (std::size_t p = 0; p < extents.size(); ++p) {
          const std::size_t block = extents[p] * split.inner;
          if (g.requires_grad(in[p])) {
            auto dst = g.grad_mut(in[p]);
            for (std::size_t o = 0; o < split.outer; ++o) {
              const double* src = gy.data() + o * split.extent * split.inner + offset;
              double* d = dst.data() + o * block;
              for (std::size_t i = 0; i < block; ++i) d[i] += src[i];
            }
          }
          offset += block;
        }
      });
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& shape = a.shape();
  const AxisSplit split = split_axis(shape, axis);
  if (begin >= end || end > split.extent) {
    throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " +
                         shape_str(shape));
  }
  Shape out_shape = shape;
  out_shape[axis] = end - begin;
  Tensor out(out_shape);
  const std::size_t block = (end - begin) * split.inner;
  const auto src = a.value().data();
  auto od = out.data();
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(src.begin() + (o * split.extent + begin) * split.inner, block, od.begin() + o * block);
  }
  return a.graph()->emit(OpKind::Slice, {a}, std::move(out), [split, begin, block](Graph& g, std::uint32_t self) {
    const auto in = g.inputs(self);
    const auto gy = g.grad(self);
    auto dst = g.grad_mut(in[0]);
    for (std::size_t o = 0; o < split.outer; ++o) {
      double* d = dst.data() + (o * split.extent + begin) * split.inner;
      const double* s = gy.data() + o * block;
      for (std::size_t i = 0; i < block; ++i) d[i] += s[i];
    }
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.graph()->emit(OpKind::Reshape, {a}, std::move(out), [](Graph& g, std::uint32_t self) {
    accumulate(g, g.inputs(self)[0], g.grad(self));
  });
}

Var gather_rows(Var a, std::vector<std::uint32_t> rows) {
  const Tensor& A = a.value();
  require_rank2(A, "gather_rows");
  const std::size_t c = A.cols();
  Tensor out({rows.size(), c});
  auto od = out.data();
  const auto src = A.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= A.rows()) throw DimensionError("gather_rows index out of range");
    std::copy_n(src.begin() + rows[i] * c, c, od.begin() + i * c);
  }
  auto idx = std::make_shared<const std::vector<std::uint32_t>>(std::move(rows));
  return a.graph()->emit(OpKind::GatherRows, {a}, std::move(out), [idx, c](Graph& g, std::uint32_t self) {
    const auto gy = g.grad(self);
    auto dst = g.grad_mut(g.inputs(self)[0]);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      double* d = dst.data() + (*idx)[i] * c;
      const double* s = gy.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) d[j] += s[j];
    }
  });
}

MaxReduced max_reduce_with_argmax(Var a, std::size_t axis) {
  const Shape& shape = a.shape();
  const AxisSplit split = split_axis(shape, axis);
  if (split.extent == 0) throw DimensionError("max_reduce over an empty axis");
  Tensor out(drop_axis(shape, axis));
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel(), 0);
  const auto src = a.value().data();
  auto od = out.data();
  for (std::size_t o = 0; o < split.outer; ++o) {
    for (std::size_t i = 0; i < split.inner; ++i) {
      const std::size_t base = o * split.extent * split.inner + i;
      double best = src[base];
      std::size_t best_k = 0;
      for (std::size_t k = 1; k < split.extent; ++k) {
        const double v = src[base + k * split.inner];
        if (v > best) {
          best = v;
          best_k = k;
        }
      }
      od[o * split.inner + i] = best;
      (*argmax)[o * split.inner + i] = best_k;
    }
  }
  MaxReduced result;
  result.argmax = *argmax;
  result.values = a.graph()->emit(OpKind::MaxReduce, {a}, std::move(out), [split, argmax](Graph& g, std::uint32_t self) {
    const auto gy = g.grad(self);
    auto dst = g.grad_mut(g.inputs(self)[0]);
    for (std::size_t o = 0; o < split.outer; ++o) {
      for (std::size_t i = 0; i < split.inner; ++i) {
        const std::size_t j = o * split.inner + i;
        dst[o * split.extent * split.inner + (*argmax)[j] * split.inner + i] += gy[j];
      }
    }
  });
  return result;
}

Var max_reduce(Var a, std::size_t axis) { return max_reduce_with_argmax(a, axis).values; }

Var mean_reduce(Var a, std::size_t axis) {
  const Shape& shape = a.shape();
  const AxisSplit split = split_axis(shape, axis);
  if (split.extent == 0) throw DimensionError("mean_reduce over an empty axis");
  Tensor out(drop_axis(shape, axis));
  const auto src = a.value().data();
  auto od = out.data();
  const double inv = 1.0 / static_cast<double>(split.extent);
  for (std::size_t o = 0; o < split.outer; ++o) {
    for (std::size_t k = 0; k < split.extent; ++k) {
      const double* s = src.data() + (o * split.extent + k) * split.inner;
      double* d = od.data() + o * split.inner;
      for (std::size_t i = 0; i < split.inner; ++i) d[i] += s[i];
    }
  }
  for (double& x : od) x *= inv;
  return a.graph()->emit(OpKind::MeanReduce, {a}, std::move(out), [split, inv](Graph& g, std::uint32_t self) {
    const auto gy = g.grad(self);
    auto dst = g.grad_mut(g.inputs(self)[0]);
    for (std::size_t o = 0; o < split.outer; ++o) {
      for (std::size_t k = 0; k < split.extent; ++k) {
        double* d = dst.data() + (o * split.extent + k) * split.inner;
        const double* s = gy.data() + o * split.inner;
        for (std::size_t i = 0; i < split.inner; ++i) d[i] += inv * s[i];
      }
    }
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double x : a.value().data()) total += x;
  return a.graph()->emit(OpKind::Sum, {a}, Tensor::scalar(total), [](Graph& g, std::uint32_t self) {
    const double gy = g.grad(self)[0];
    for (double& d : g.grad_mut(g.inputs(self)[0])) d += gy;
  });
}

namespace {

void check_offsets(std::span<const std::uint32_t> offsets, std::size_t rows) {
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != rows) {
    throw DimensionError("segment offsets must start at 0 and end at the row count");
  }
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    if (offsets[s + 1] <= offsets[s]) throw DimensionError("empty or decreasing segment");
  }
}

}  // namespace

Var segment_max(Var a, std::span<const std::uint32_t> offsets) {
  const Tensor& A = a.value();
  require_rank2(A, "segment_max");
  check_offsets(offsets, A.rows());
  const std::size_t segments = offsets.size() - 1, c = A.cols();
  Tensor out({segments, c});
  auto argrow = std::make_shared<std::vector<std::uint32_t>>(segments * c);
  const auto src = A.data();
  auto od = out.data();
  for (std::size_t s = 0; s < segments; ++s) {
    const std::uint32_t lo = offsets[s], hi = offsets[s + 1];
    for (std::size_t j = 0; j < c; ++j) {
      od[s * c + j] = src[lo * c + j];
      (*argrow)[s * c + j] = lo;
    }
    for (std::uint32_t r = lo + 1; r < hi; ++r) {
      const double* row = src.data() + r * c;
      for (std::size_t j = 0; j < c; ++j) {
        if (row[j] > od[s * c + j]) {
          od[s * c + j] = row[j];
          (*argrow)[s * c + j] = r;
        }
      }
    }
  }
  return a.graph()->emit(OpKind::SegmentMax, {a}, std::move(out), [argrow, c](Graph& g, std::uint32_t self) {
    const auto gy = g.grad(self);
    auto dst = g.grad_mut(g.inputs(self)[0]);
    for (std::size_t i = 0; i < gy.size(); ++i) dst[(*argrow)[i] * c + i % c] += gy[i];
  });
}

Var segment_weighted_sum(Var a, std::span<const std::uint32_t> offsets, std::span<const double> weights) {
  const Tensor& A = a.value();
  require_rank2(A, "segment_weighted_sum");
  check_offsets(offsets, A.rows());
  if (weights.size() != A.rows()) throw DimensionError("segment_weighted_sum: one weight per row required");
  const std::size_t segments = offsets.size() - 1, c = A.cols();
  Tensor out({segments, c});
  const auto src = A.data();
  auto od = out.data();
  auto offs = std::make_shared<const std::vector<std::uint32_t>>(offsets.begin(), offsets.end());
  auto w = std::make_shared<const std::vector<double>>(weights.begin(), weights.end());
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::uint32_t r = (*offs)[s]; r < (*offs)[s + 1]; ++r) {
      for (std::size_t j = 0; j < c; ++j) od[s * c + j] += (*w)[r] * src[r * c + j];
    }
  }
  return a.graph()->emit(OpKind::SegmentWeightedSum, {a}, std::move(out), [offs, w, c](Graph& g, std::uint32_t self) {
    const auto gy = g.grad(self);
    auto dst = g.grad_mut(g.inputs(self)[0]);
    for (std::size_t s = 0; s + 1 < offs->size(); ++s) {
      for (std::uint32_t r = (*offs)[s]; r < (*offs)[s + 1]; ++r) {
        for (std::size_t j = 0; j < c; ++j) dst[r * c + j] += (*w)[r] * gy[s * c + j];
      }
    }
  });
}

Var scale_channels(Var x, Var gate) {
  const Tensor& X = x.value();
  const Tensor& G = gate.value();
  if (X.rank() != 3 || G.rank() != 2 || G.dim(0) != X.dim(0) || G.dim(1) != X.dim(2)) {
    throw DimensionError("scale_channels: " + shape_str(X.shape()) + " with gate " + shape_str(G.shape()));
  }
  const std::size_t groups = X.dim(0), k = X.dim(1), d = X.dim(2);
  Tensor out = X;
  auto od = out.data();
  const auto gd = G.data();
  for (std::size_t i = 0; i < groups; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t c = 0; c < d; ++c) od[(i * k + j) * d + c] *= gd[i * d + c];
    }
  }
  return x.graph()->emit(OpKind::ScaleChannels, {x, gate}, std::move(out), [groups, k, d](Graph& g, std::uint32_t self) {
    const auto in = g.inputs(self);
    const auto gy = g.grad(self);
    const auto xv = g.value(in[0]).data();
    const auto gv = g.value(in[1]).data();
    if (g.requires_grad(in[0])) {
      auto dx = g.grad_mut(in[0]);
      for (std::size_t i = 0; i < groups; ++i)
        for (std::size_t j = 0; j < k; ++j)
          for (std::size_t c = 0; c < d; ++c) dx[(i * k + j) * d + c] += gy[(i * k + j) * d + c] * gv[i * d + c];
    }
    if (g.requires_grad(in[1])) {
      auto dg = g.grad_mut(in[1]);
      for (std::size_t i = 0; i < groups; ++i)
        for (std::size_t j = 0; j < k; ++j)
          for (std::size_t c = 0; c < d; ++c) dg[i * d + c] += gy[(i * k + j) * d + c] * xv[(i * k + j) * d + c];
    }
  });
}

Var softmax_rows(Var a) {
  const Tensor& A = a.value();
  require_rank2(A, "softmax_rows");
  const std::size_t r = A.rows(), c = A.cols();
  Tensor out = A;
  auto od = out.data();
  for (std::size_t i = 0; i < r; ++i) {
    double* row = od.data() + i * c;
    const double m = *std::max_element(row, row + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      row[j] = std::exp(row[j] - m);
      total += row[j];
    }
    for (std::size_t j = 0; j < c; ++j) row[j] /= total;
  }
  return a.graph()->emit(OpKind::SoftmaxRows, {a}, std::move(out), [r, c](Graph& g, std::uint32_t self) {
    const auto y = g.value(self).data();
    const auto gy = g.grad(self);
    auto dst = g.grad_mut(g.inputs(self)[0]);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += gy[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) dst[i * c + j] += y[i * c + j] * (gy[i * c + j] - dot);
    }
  });
}

Var layer_norm(Var a, Var gamma, Var beta, double eps) {
  if (!(eps > 0.0)) throw ContractError("layer_norm requires eps > 0");
  const Tensor& A = a.value();
  require_rank2(A, "layer_norm");
  const std::size_t r = A.rows(), c = A.cols();
  if (gamma.value().numel() != c || beta.value().numel() != c) throw DimensionError("layer_norm: affine length mismatch");
  auto xhat = std::make_shared<std::vector<double>>(r * c);
  auto inv_std = std::make_shared<std::vector<double>>(r);
  Tensor out({r, c});
  const auto src = A.data();
  const auto gv = gamma.value().data();
  const auto bv = beta.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = src.data() + i * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += row[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double xh = (row[j] - mean) * is;
      (*xhat)[i * c + j] = xh;
      od[i * c + j] = gv[j] * xh + bv[j];
    }
  }
  return a.graph()->emit(OpKind::LayerNorm, {a, gamma, beta}, std::move(out),
                         [r, c, xhat, inv_std](Graph& g, std::uint32_t self) {
                           const auto in = g.inputs(self);
                           const auto gy = g.grad(self);
                           const auto gv = g.value(in[1]).data();
                           if (g.requires_grad(in[0])) {
                             auto dx = g.grad_mut(in[0]);
                             std::vector<double> dxh(c);
                             for (std::size_t i = 0; i < r; ++i) {
                               double mean_d = 0.0, mean_dx = 0.0;
                               for (std::size_t j = 0; j < c; ++j) {
                                 dxh[j] = gy[i * c + j] * gv[j];
                                 mean_d += dxh[j];
                                 mean_dx += dxh[j] * (*xhat)[i * c + j];
                               }
                               mean_d /= static_cast<double>(c);
                               mean_dx /= static_cast<double>(c);
                               for (std::size_t j = 0; j < c; ++j) {
                                 dx[i * c + j] += (*inv_std)[i] * (dxh[j] - mean_d - (*xhat)[i * c + j] * mean_dx);
                               }
                             }
                           }
                           if (g.requires_grad(in[1])) {
                             auto dg = g.grad_mut(in[1]);
                             for (std::size_t i = 0; i < r * c; ++i) dg[i % c] += gy[i] * (*xhat)[i];
                           }
                           if (g.requires_grad(in[2])) {
                             auto db = g.grad_mut(in[2]);
                             for (std::size_t i = 0; i < r * c; ++i) db[i % c] += gy[i];
                           }
                         });
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& x : p) {
    x = std::exp(x - m);
    total += x;
  }
  for (double& x : p) x /= total;
  return p;
}

Var cross_entropy(Var logits, std::size_t label) {
  const Tensor& L = logits.value();
  if (!(L.rank() == 1 || (L.rank() == 2 && L.rows() == 1))) {
    throw DimensionError("cross_entropy expects [C] or [1,C] logits, got " + shape_str(L.shape()));
  }
  const std::size_t classes = L.numel();
  if (label >= classes) {
    throw ContractError("label " + std::to_string(label) + " out of range for " + std::to_string(classes) + " classes");
  }
  const auto x = L.data();
  const double m = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (double v : x) total += std::exp(v - m);
  const double loss = std::log(total) + m - x[label];
  return logits.graph()->emit(OpKind::CrossEntropy, {logits}, Tensor::scalar(loss), [label](Graph& g, std::uint32_t self) {
    const std::uint32_t in = g.inputs(self)[0];
    const double gy = g.grad(self)[0];
    const auto p = softmax(g.value(in).data());
    auto dst = g.grad_mut(in);
    for (std::size_t j = 0; j < p.size(); ++j) dst[j] += gy * (p[j] - (j == label ? 1.0 : 0.0));
  });
}

}  // namespace tmdpt
