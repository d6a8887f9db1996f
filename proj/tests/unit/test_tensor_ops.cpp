#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_support.hpp"
#include "tmdpt/errors.hpp"
#include "tmdpt/ops.hpp"

using namespace tmdpt;
using tmdpt::testing::max_gradient_error;
using tmdpt::testing::random_tensor;

TEST(Tensor, ShapeAndStorageAgree) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  EXPECT_EQ(Tensor::scalar(3.5).shape(), Shape{1});
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  std::mt19937_64 rng(1);
  Graph g;
  const Tensor m = random_tensor({3, 5}, rng);
  Var out = matmul(g.input(Tensor::identity(3)), g.input(m));
  EXPECT_EQ(out.value(), m);
}

TEST(Matmul, SmallProductMatchesLoopOracle) {
  Graph g;
  Var out = matmul(g.input(Tensor::matrix({{1, 2}, {3, 4}})), g.input(Tensor::matrix({{1}, {1}})));
  EXPECT_EQ(out.value(), Tensor::matrix({{3}, {7}}));

  std::mt19937_64 rng(2);
  const Tensor a = random_tensor({4, 6}, rng), b = random_tensor({6, 3}, rng);
  Var c = matmul(g.input(a), g.input(b));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 6; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.value().at(i, j), s, 1e-14);
    }
  }
}

TEST(Matmul, InnerExtentMismatchThrows) {
  Graph g;
  EXPECT_THROW(matmul(g.input(Tensor({2, 3})), g.input(Tensor({2, 3}))), DimensionError);
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const double err = max_gradient_error({random_tensor({4, 4}, rng), random_tensor({4, 4}, rng)},
                                        [](Graph&, const std::vector<Var>& v) { return matmul(v[0], v[1]); });
  EXPECT_LT(err, 1e-6);
}

TEST(SoftmaxRows, UniformAndSingletonRows) {
  Graph g;
  Var u = softmax_rows(g.input(Tensor({1, 3})));
  for (double x : u.value().data()) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
  Var s = softmax_rows(g.input(Tensor::matrix({{42.0}})));
  EXPECT_EQ(s.value().item(), 1.0);
}

TEST(SoftmaxRows, MatchesDirectExpNormalize) {
  Graph g;
  Var s = softmax_rows(g.input(Tensor::matrix({{1, 2, 3}})));
  const long double z = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(s.value()[i], static_cast<double>(std::exp(static_cast<long double>(i + 1)) / z), 1e-12);
  }
}

TEST(SoftmaxRows, RowsSumToOneAndLargeLogitsStayFinite) {
  std::mt19937_64 rng(4);
  Graph g;
  Tensor t = random_tensor({5, 7}, rng, -50, 50);
  t.at(0, 0) = 900.0;
  Var s = softmax_rows(g.input(t));
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 7; ++c) total += s.value().at(r, c);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(SoftmaxRows, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  EXPECT_LT(max_gradient_error({random_tensor({3, 5}, rng)},
                               [](Graph&, const std::vector<Var>& v) { return softmax_rows(v[0]); }),
            1e-6);
}

TEST(MaxReduce, ValuesAndArgmaxOverRows) {
  Graph g;
  MaxReduced m = max_reduce_with_argmax(g.input(Tensor::matrix({{1, 5}, {7, 2}})), 0);
  EXPECT_EQ(m.values.value(), Tensor({2}, {7, 5}));
  EXPECT_EQ(m.argmax, (std::vector<std::size_t>{1, 0}));
}

TEST(MaxReduce, SingleElementAxisIsIdentity) {
  Graph g;
  MaxReduced m = max_reduce_with_argmax(g.input(Tensor::matrix({{3, -1, 4}})), 0);
  EXPECT_EQ(m.values.value(), Tensor({3}, {3, -1, 4}));
  EXPECT_EQ(m.argmax, (std::vector<std::size_t>{0, 0, 0}));
}

TEST(MaxReduce, TiesGoToLowestIndex) {
  Graph g;
  MaxReduced m = max_reduce_with_argmax(g.input(Tensor::matrix({{2, 2, 1, 2}})), 1);
  EXPECT_EQ(m.argmax, (std::vector<std::size_t>{0}));
}

TEST(MaxReduce, GradientIsOneHotPerSlice) {
  std::mt19937_64 rng(6);
  Tensor t = random_tensor({4, 6, 3}, rng);
  t.data()[0] = t.data()[3];  // a tie inside the first slice along axis 1
  Graph g2;
  Parameter p{"x", t, {}};
  Var xp = g2.param(p);
  Var loss = sum(max_reduce(xp, 1));
  g2.backward(loss);
  const auto grad = g2.grad(xp);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      int ones = 0;
      for (std::size_t j = 0; j < 6; ++j) {
        const double v = grad[(i * 6 + j) * 3 + c];
        EXPECT_TRUE(v == 0.0 || v == 1.0);
        ones += v == 1.0;
      }
      EXPECT_EQ(ones, 1);
    }
  }
}

TEST(MaxReduce, EmptyAxisThrows) {
  Graph g;
  Var x = g.input(Tensor({2, 3}));
  EXPECT_THROW(max_reduce(slice(x, 1, 1, 1), 1), DimensionError);
}

TEST(LayerNorm, ConstantRowMapsToZero) {
  Graph g;
  Var y = layer_norm(g.input(Tensor::full({1, 5}, 3.0)), g.input(Tensor::full({5}, 1.0)), g.input(Tensor({5})));
  for (double v : y.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, RowsHaveZeroMeanAndUnitVariance) {
  std::mt19937_64 rng(8);
  Graph g;
  Var y = layer_norm(g.input(random_tensor({6, 32}, rng, -3, 3)), g.input(Tensor::full({32}, 1.0)),
                     g.input(Tensor({32})), 1e-12);
  for (std::size_t r = 0; r < 6; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 32; ++c) mean += y.value().at(r, c);
    mean /= 32;
    for (std::size_t c = 0; c < 32; ++c) var += std::pow(y.value().at(r, c) - mean, 2);
    var /= 32;
    EXPECT_LT(std::abs(mean), 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-9);
  }
}

TEST(LayerNorm, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  EXPECT_LT(max_gradient_error({random_tensor({3, 6}, rng), random_tensor({6}, rng, 0.5, 1.5), random_tensor({6}, rng)},
                               [](Graph&, const std::vector<Var>& v) { return layer_norm(v[0], v[1], v[2]); }),
            1e-6);
}

TEST(Elementwise, ReluValuesAndZeroSubgradient) {
  Graph g;
  Parameter p{"x", Tensor({3}, {-1.0, 0.0, 2.0}), {}};
  Var x = g.param(p);
  Var y = relu(x);
  EXPECT_EQ(y.value(), Tensor({3}, {0.0, 0.0, 2.0}));
  g.backward(sum(y));
  EXPECT_EQ(std::vector<double>(g.grad(x).begin(), g.grad(x).end()), (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Elementwise, CrossEntropyOfUniformLogitsIsLogC) {
  Graph g;
  for (std::size_t label = 0; label < 6; ++label) {
    EXPECT_NEAR(cross_entropy(g.input(Tensor({6})), label).value().item(), std::log(6.0), 1e-15);
  }
  EXPECT_THROW(cross_entropy(g.input(Tensor({6})), 6), ContractError);
}

TEST(Elementwise, ConcatShapeArithmetic) {
  Graph g;
  Var c = concat({g.input(Tensor({2, 3})), g.input(Tensor({2, 5}))}, 1);
  EXPECT_EQ(c.shape(), (Shape{2, 8}));
  EXPECT_THROW(concat({g.input(Tensor({2, 3})), g.input(Tensor({3, 3}))}, 1), DimensionError);
}

TEST(Elementwise, ShapeMismatchThrows) {
  Graph g;
  EXPECT_THROW(add(g.input(Tensor({2, 3})), g.input(Tensor({3, 2}))), DimensionError);
  EXPECT_THROW(add_bias(g.input(Tensor({2, 3})), g.input(Tensor({2}))), DimensionError);
}

TEST(Elementwise, NonFiniteResultIsANumericError) {
  Graph g;
  EXPECT_THROW(scale(g.input(Tensor::full({2}, 1e300)), 1e300), NumericError);
}

struct OpCase {
  const char* name;
  std::vector<Shape> shapes;
  tmdpt::testing::GraphFn fn;
};

void PrintTo(const OpCase& c, std::ostream* os) { *os << c.name; }

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const OpCase& c = GetParam();
  std::mt19937_64 rng(11);
  std::vector<Tensor> inputs;
  for (const Shape& s : c.shapes) inputs.push_back(random_tensor(s, rng));
  EXPECT_LT(max_gradient_error(inputs, c.fn), 1e-6) << c.name;
}

const std::vector<std::uint32_t> kOffsets{0, 2, 3, 7};
const std::vector<double> kWeights{0.5, 0.5, 1.0, 0.25, 0.25, 0.25, 0.25};

INSTANTIATE_TEST_SUITE_P(
    AllOps, OpGradient,
    ::testing::Values(
        OpCase{"affine", {{3, 4}, {4, 2}, {2}}, [](Graph&, const std::vector<Var>& v) { return affine(v[0], v[1], v[2]); }},
        OpCase{"transpose", {{3, 4}}, [](Graph&, const std::vector<Var>& v) { return transpose(v[0]); }},
        OpCase{"add", {{3, 4}, {3, 4}}, [](Graph&, const std::vector<Var>& v) { return add(v[0], v[1]); }},
        OpCase{"sub", {{3, 4}, {3, 4}}, [](Graph&, const std::vector<Var>& v) { return sub(v[0], v[1]); }},
        OpCase{"mul", {{3, 4}, {3, 4}}, [](Graph&, const std::vector<Var>& v) { return mul(v[0], v[1]); }},
        OpCase{"scale", {{3, 4}}, [](Graph&, const std::vector<Var>& v) { return scale(v[0], -2.5); }},
        OpCase{"add_bias", {{2, 3, 4}, {4}}, [](Graph&, const std::vector<Var>& v) { return add_bias(v[0], v[1]); }},
        OpCase{"sigmoid", {{3, 4}}, [](Graph&, const std::vector<Var>& v) { return sigmoid(v[0]); }},
        OpCase{"concat0", {{2, 3}, {4, 3}}, [](Graph&, const std::vector<Var>& v) { return concat({v[0], v[1]}, 0); }},
        OpCase{"concat1", {{2, 3}, {2, 5}}, [](Graph&, const std::vector<Var>& v) { return concat({v[0], v[1]}, 1); }},
        OpCase{"slice", {{4, 5}}, [](Graph&, const std::vector<Var>& v) { return slice(v[0], 1, 1, 4); }},
        OpCase{"reshape", {{4, 6}}, [](Graph&, const std::vector<Var>& v) { return reshape(v[0], {2, 12}); }},
        OpCase{"gather_rows", {{4, 3}}, [](Graph&, const std::vector<Var>& v) { return gather_rows(v[0], {3, 0, 3, 1, 3}); }},
        OpCase{"max_reduce", {{3, 5, 2}}, [](Graph&, const std::vector<Var>& v) { return max_reduce(v[0], 1); }},
        OpCase{"mean_reduce", {{3, 5, 2}}, [](Graph&, const std::vector<Var>& v) { return mean_reduce(v[0], 1); }},
        OpCase{"sum", {{3, 4}}, [](Graph&, const std::vector<Var>& v) { return sum(v[0]); }},
        OpCase{"segment_max", {{7, 3}}, [](Graph&, const std::vector<Var>& v) { return segment_max(v[0], kOffsets); }},
        OpCase{"segment_weighted_sum", {{7, 3}},
               [](Graph&, const std::vector<Var>& v) { return segment_weighted_sum(v[0], kOffsets, kWeights); }},
        OpCase{"scale_channels", {{2, 3, 4}, {2, 4}},
               [](Graph&, const std::vector<Var>& v) { return scale_channels(v[0], v[1]); }},
        OpCase{"cross_entropy", {{1, 5}}, [](Graph&, const std::vector<Var>& v) { return cross_entropy(v[0], 2); }}),
    [](const ::testing::TestParamInfo<OpCase>& info) { return std::string(info.param.name); });
