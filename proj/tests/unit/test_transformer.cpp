#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "tmdpt/errors.hpp"
#include "tmdpt/transformer.hpp"

using namespace tmdpt;
using tmdpt::testing::max_gradient_error;
using tmdpt::testing::random_tensor;

namespace {

struct Head {
  TransformerConfig config;
  FeatureLayout layout{5, 4};
  ParameterStore store;
  HeadWeights weights;
  Head(std::size_t tokens, std::size_t blocks, std::uint64_t seed = 1) {
    config.d_model = 8;
    config.heads = 2;
    config.blocks = blocks;
    config.num_classes = 6;
    Rng rng(seed);
    weights = make_head_weights(store, config, layout, tokens, rng);
  }
  IntegratedFeature feature(Graph& g, const Tensor& rows) const { return {g.input(rows), layout, rows.dim(0) - 1}; }
};

void zero_params(ParameterStore& store, const std::string& prefix) {
  for (Parameter* p : store.all()) {
    if (p->name.rfind(prefix, 0) == 0) p->value = Tensor(p->value.shape());
  }
}

}  // namespace

TEST(InputProjection, IdentityWeightsKeepTokensAndShape) {
  ParameterStore store;
  Rng init(1);
  Linear proj = make_linear(store, "p", 6, 6, init);
  proj.weight->value = Tensor::identity(6);
  proj.bias->value = Tensor({6});
  std::mt19937_64 rng(2);
  const Tensor s = random_tensor({7, 6}, rng);
  Graph g;
  EXPECT_EQ(input_projection(g, proj, g.input(s)).value(), s);

  EncoderConfig enc;
  TransformerConfig tc;
  ParameterStore big;
  const HeadWeights hw = make_head_weights(big, tc, feature_layout(enc), 7, init);
  EXPECT_EQ(input_projection(g, *hw.projection, g.input(Tensor({7, 643}))).shape(), (Shape{7, 288}));
}

TEST(InputProjection, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const double err = max_gradient_error({random_tensor({3, 5}, rng), random_tensor({5, 4}, rng), random_tensor({4}, rng)},
                                        [](Graph&, const std::vector<Var>& in) { return affine(in[0], in[1], in[2]); });
  EXPECT_LT(err, 1e-6);
}

TEST(Attention, RowsSumToOne) {
  Head h(7, 1);
  std::mt19937_64 rng(4);
  Graph g;
  std::vector<Tensor> maps;
  multi_head_self_attention(g, h.weights.blocks[0].attention, g.input(random_tensor({7, 8}, rng, -3.0, 3.0)), &maps);
  ASSERT_EQ(maps.size(), 2u);
  for (const Tensor& a : maps) {
    ASSERT_EQ(a.shape(), (Shape{7, 7}));
    for (std::size_t r = 0; r < 7; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        EXPECT_GT(a[r * 7 + c], 0.0);
        s += a[r * 7 + c];
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Attention, SingleTokenAttendsToItself) {
  Head h(1, 1);
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({1, 8}, rng);
  Graph g;
  std::vector<Tensor> maps;
  const AttentionWeights& w = h.weights.blocks[0].attention;
  const Tensor out = multi_head_self_attention(g, w, g.input(x), &maps).value();
  for (const Tensor& a : maps) EXPECT_EQ(a.storage(), std::vector<double>{1.0});
  // With weights 1 the output is the value projection pushed through the output affine.
  const Tensor expected = w.wo(g, w.wv(g, g.input(x))).value();
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(out[i], expected[i], 1e-14);
}

TEST(Attention, IdenticalTokensGiveUniformWeightsAndIdenticalRows) {
  Head h(5, 1);
  std::mt19937_64 rng(6);
  const Tensor row = random_tensor({1, 8}, rng);
  Tensor x({5, 8});
  for (std::size_t r = 0; r < 5; ++r) std::copy(row.data().begin(), row.data().end(), x.data().begin() + r * 8);
  Graph g;
  std::vector<Tensor> maps;
  const Tensor out = multi_head_self_attention(g, h.weights.blocks[0].attention, g.input(x), &maps).value();
  for (const Tensor& a : maps) {
    for (double v : a.data()) EXPECT_NEAR(v, 0.2, 1e-15);
  }
  for (std::size_t r = 1; r < 5; ++r) {
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(out[r * 8 + c], out[c]);
  }
}

TEST(Attention, GradientMatchesFiniteDifferences) {
  Head h(4, 1);
  const AttentionWeights& w = h.weights.blocks[0].attention;
  std::mt19937_64 rng(7);
  const double err = max_gradient_error({random_tensor({4, 8}, rng)}, [&](Graph& g, const std::vector<Var>& in) {
    return multi_head_self_attention(g, w, in[0]);
  });
  EXPECT_LT(err, 1e-6);
}

TEST(TransformerBlock, ShapePreservedAndFinite) {
  for (std::size_t blocks : {0u, 1u, 3u}) {
    Head h(7, blocks);
    std::mt19937_64 rng(8);
    Graph g;
    const HeadOutput out = run_head(g, h.weights, h.config, h.feature(g, random_tensor({7, 13}, rng)), true);
    EXPECT_EQ(out.tokens.shape(), (Shape{7, 8}));
    EXPECT_EQ(out.attention.size(), blocks * 2);
    EXPECT_TRUE(out.logits.value().all_finite());
    EXPECT_EQ(out.logits.shape(), (Shape{1, 6}));
  }
}

TEST(TransformerBlock, EmptyStackPassesProjectedTokens) {
  Head h(3, 0);
  std::mt19937_64 rng(9);
  const Tensor s = random_tensor({3, 13}, rng);
  Graph g;
  const HeadOutput out = run_head(g, h.weights, h.config, h.feature(g, s));
  EXPECT_EQ(out.tokens.value(), input_projection(g, *h.weights.projection, g.input(s)).value());
}

TEST(TransformerBlock, GradientMatchesFiniteDifferences) {
  Head h(3, 2);
  std::mt19937_64 rng(10);
  const double err = max_gradient_error({random_tensor({3, 8}, rng)}, [&](Graph& g, const std::vector<Var>& in) {
    Var x = in[0];
    for (const BlockWeights& b : h.weights.blocks) x = transformer_block(g, b, x);
    return x;
  });
  EXPECT_LT(err, 1e-4);
}

TEST(Classify, ZeroClassifierGivesLogC) {
  Head h(7, 1);
  zero_params(h.store, "head.classifier");
  std::mt19937_64 rng(11);
  Graph g;
  const HeadOutput out = run_head(g, h.weights, h.config, h.feature(g, random_tensor({7, 13}, rng)));
  for (double v : out.logits.value().data()) EXPECT_EQ(v, 0.0);
  EXPECT_NEAR(cross_entropy(out.logits, 2).value().item(), std::log(6.0), 1e-15);
}

TEST(Classify, GlobalResidualPathIsLive) {
  Head h(7, 1);
  for (Parameter* p : h.store.all()) {
    if (p->name.rfind("head.classifier", 0) != 0) p->value = Tensor(p->value.shape());
  }
  std::mt19937_64 rng(12);
  Tensor s = random_tensor({7, 13}, rng);
  Graph g;
  const Tensor a = run_head(g, h.weights, h.config, h.feature(g, s)).logits.value();
  s[3] += 0.5;
  const Tensor b = run_head(g, h.weights, h.config, h.feature(g, s)).logits.value();
  EXPECT_NE(a, b);
  s[3] -= 0.5;
  s[13 + 3] += 0.5;  // a partial row alone cannot move the logits once the transformer is zeroed
  EXPECT_EQ(run_head(g, h.weights, h.config, h.feature(g, s)).logits.value(), a);
}

TEST(Classify, MaxPoolAggregationUsesRowMax) {
  TransformerConfig tc;
  tc.d_model = 8;
  tc.heads = 2;
  tc.blocks = 0;
  tc.output_aggregation = OutputAggregation::MaxPool;
  const FeatureLayout layout{5, 4};
  ParameterStore store;
  Rng init(13);
  const HeadWeights w = make_head_weights(store, tc, layout, 4, init);
  EXPECT_FALSE(w.compress.has_value());
  EXPECT_EQ(w.classifier.in, 8u + 13u);
  std::mt19937_64 rng(14);
  const Tensor tokens = random_tensor({4, 8}, rng), global = random_tensor({1, 13}, rng);
  Graph g;
  const Tensor logits = classify(g, w, OutputAggregation::MaxPool, g.input(tokens), g.input(global)).value();
  const Tensor expected =
      w.classifier(g, concat({reshape(max_reduce(g.input(tokens), 0), {1, 8}), g.input(global)}, 1)).value();
  EXPECT_EQ(logits, expected);
}

TEST(RunHead, MotionOnlyAndDisabledTransformer) {
  TransformerConfig tc;
  tc.d_model = 8;
  tc.heads = 2;
  tc.blocks = 1;
  tc.input = TransformerInput::MotionOnly;
  const FeatureLayout layout{5, 4};
  ParameterStore store;
  Rng init(15);
  const HeadWeights w = make_head_weights(store, tc, layout, 3, init);
  EXPECT_EQ(w.projection->in, 4u);
  std::mt19937_64 rng(16);
  Tensor s = random_tensor({3, 13}, rng);
  Graph g;
  const IntegratedFeature f{g.input(s), layout, 2};
  const Tensor a = run_head(g, w, tc, f).tokens.value();
  s[13 + 2] += 1.0;  // an L channel of a partial row
  const Tensor b = run_head(g, w, tc, IntegratedFeature{g.input(s), layout, 2}).tokens.value();
  EXPECT_EQ(a, b);

  TransformerConfig off = tc;
  off.enabled = false;
  off.input = TransformerInput::MultiLevel;
  ParameterStore store2;
  const HeadWeights w2 = make_head_weights(store2, off, layout, 3, init);
  EXPECT_FALSE(w2.projection.has_value());
  EXPECT_TRUE(w2.blocks.empty());
  const HeadOutput out = run_head(g, w2, off, IntegratedFeature{g.input(s), layout, 2});
  EXPECT_EQ(out.tokens.value(), s);
  EXPECT_EQ(out.logits.shape(), (Shape{1, 6}));
}
