#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "tmdpt/errors.hpp"
#include "tmdpt/frame_encoder.hpp"
#include "tmdpt/random.hpp"

using namespace tmdpt;
using tmdpt::testing::max_gradient_error;
using tmdpt::testing::random_points;
using tmdpt::testing::random_tensor;

namespace {

EncoderConfig small_encoder() {
  EncoderConfig c;
  c.raw_points = 128;
  c.points_per_frame = 48;
  c.centroids_level1 = 12;
  c.centroids_level2 = 5;
  c.group_size_level1 = 8;
  c.group_size_level2 = 6;
  c.radius_level1 = 0.4;
  c.radius_level2 = 0.8;
  c.sa1_widths = {6, 8};
  c.sa2_widths = {12};
  c.frame_feature_width = 10;
  c.ca_reduction = 4;
  return c;
}

struct Fixture {
  EncoderConfig config = small_encoder();
  ParameterStore store;
  EncoderWeights weights;
  explicit Fixture(std::uint64_t seed = 1) {
    Rng rng(seed);
    weights = make_encoder_weights(store, config, rng);
  }
};

std::vector<FramePlan> plans_for(const std::vector<std::vector<Vec3>>& frames, const EncoderConfig& c) {
  std::vector<FramePlan> out;
  for (const auto& f : frames) out.push_back(plan_frame(f, c));
  return out;
}

void expect_all_near(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

}  // namespace

TEST(ChannelAttention, ZeroWeightsHalveInput) {
  Fixture fx;
  for (Parameter* p : fx.store.all()) {
    if (p->name.rfind("encoder.ca.", 0) == 0) p->value = Tensor(p->value.shape());
  }
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({3, 4, 12}, rng);
  Graph g;
  const Tensor out = channel_attention(g, *fx.weights.attention, g.input(x)).value();
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(out[i], 0.5 * x[i]);
}

TEST(ChannelAttention, MatchesHandRolledGateFormula) {
  ParameterStore store;
  Rng init(3);
  ChannelAttentionWeights w{make_linear(store, "h", 8, 2, init), make_linear(store, "o", 2, 8, init)};
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({1, 4, 8}, rng);
  Graph g;
  const Tensor out = channel_attention(g, w, g.input(x)).value();

  auto mlp = [&](const std::vector<double>& v) {
    std::vector<double> h(2), o(8);
    for (std::size_t j = 0; j < 2; ++j) {
      double s = w.hidden.bias->value[j];
      for (std::size_t i = 0; i < 8; ++i) s += v[i] * w.hidden.weight->value[i * 2 + j];
      h[j] = std::max(0.0, s);
    }
    for (std::size_t j = 0; j < 8; ++j) {
      double s = w.out.bias->value[j];
      for (std::size_t i = 0; i < 2; ++i) s += h[i] * w.out.weight->value[i * 8 + j];
      o[j] = s;
    }
    return o;
  };
  std::vector<double> mx(8, -1e300), mean(8, 0.0);
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t c = 0; c < 8; ++c) {
      mx[c] = std::max(mx[c], x[k * 8 + c]);
      mean[c] += x[k * 8 + c] / 4.0;
    }
  }
  const auto a = mlp(mx), b = mlp(mean);
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t c = 0; c < 8; ++c) {
      const double gate = 1.0 / (1.0 + std::exp(-(a[c] + b[c])));
      EXPECT_GT(gate, 0.0);
      EXPECT_LT(gate, 1.0);
      EXPECT_NEAR(out[k * 8 + c], gate * x[k * 8 + c], 1e-14);
    }
  }
}

TEST(SetAbstraction, CompactPathMatchesPaddedReference) {
  Fixture fx;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto pts = random_points(48, rng, 0.6);
    const SaLevel l1{12, 0.4, 8};
    const LevelPlan p1 = plan_level(pts, l1);
    Graph g;
    const LevelPlan* plans1[] = {&p1};
    const Var compact1 = apply_level(g, fx.weights.level1, nullptr, plans1, std::nullopt, 48);
    const Var padded1 = set_abstraction_padded(g, fx.weights.level1, p1.groups, pts, nullptr, nullptr);
    expect_all_near(compact1.value(), padded1.value(), 1e-12);

    const SaLevel l2{5, 0.8, 6};
    const LevelPlan p2 = plan_level(p1.centroids, l2);
    const LevelPlan* plans2[] = {&p2};
    const Var compact2 = apply_level(g, fx.weights.level2, &*fx.weights.attention, plans2, compact1, 12);
    const Tensor f1 = compact1.value();
    const Var padded2 = set_abstraction_padded(g, fx.weights.level2, p2.groups, p1.centroids, &f1, &*fx.weights.attention);
    expect_all_near(compact2.value(), padded2.value(), 1e-12);
  }
}

TEST(SetAbstraction, IdenticalPointsGiveIdenticalRows) {
  Fixture fx;
  const std::vector<Vec3> pts(48, Vec3{0.2, -0.1, 0.3});
  Graph g;
  const auto out = set_abstraction(g, fx.weights.level1, {12, 0.4, 8}, pts, std::nullopt);
  const Tensor& v = out.features.value();
  ASSERT_EQ(v.shape(), (Shape{12, 8}));
  for (std::size_t r = 1; r < 12; ++r) {
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(v[r * 8 + c], v[c]);
  }
}

TEST(SetAbstraction, GroupMemberOrderDoesNotMatter) {
  Fixture fx;
  std::mt19937_64 rng(6);
  const auto pts = random_points(48, rng, 0.6);
  GroupSpec spec = plan_level(pts, {12, 0.4, 8}).groups;
  Graph g;
  const Tensor a = set_abstraction_padded(g, fx.weights.level1, spec, pts, nullptr, nullptr).value();
  for (std::size_t i = 0; i < spec.groups(); ++i) {
    std::reverse(spec.group_indices.begin() + i * 8, spec.group_indices.begin() + (i + 1) * 8);
  }
  const Tensor b = set_abstraction_padded(g, fx.weights.level1, spec, pts, nullptr, nullptr).value();
  EXPECT_EQ(a.storage(), b.storage());
}

TEST(SetAbstraction, LevelOneShapeAtFullSize) {
  EncoderConfig c;
  ParameterStore store;
  Rng init(1);
  const EncoderWeights w = make_encoder_weights(store, c, init);
  std::mt19937_64 rng(7);
  const auto pts = random_points(512, rng);
  Graph g;
  const auto out = set_abstraction(g, w.level1, {128, 0.06, 32}, pts, std::nullopt);
  EXPECT_EQ(out.features.shape(), (Shape{128, 64}));
  EXPECT_EQ(out.centroids.size(), 128u);
}

TEST(FrameSpatialFeature, SingletonRegionAndRowSymmetries) {
  ParameterStore store;
  Rng init(8);
  const Linear mlp = make_linear(store, "fs", 5, 7, init);
  std::mt19937_64 rng(9);
  const Tensor regions = random_tensor({4, 5}, rng);
  Graph g;
  const Tensor base = frame_spatial_feature(g, mlp, g.input(regions), 1).value();
  ASSERT_EQ(base.shape(), (Shape{1, 7}));

  Tensor permuted({4, 5});
  const std::size_t order[] = {2, 0, 3, 1};
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 5; ++c) permuted[r * 5 + c] = regions[order[r] * 5 + c];
  }
  EXPECT_EQ(frame_spatial_feature(g, mlp, g.input(permuted), 1).value().storage(), base.storage());

  Tensor duplicated({5, 5});
  std::copy(regions.data().begin(), regions.data().end(), duplicated.data().begin());
  std::copy(regions.data().begin() + 5, regions.data().begin() + 10, duplicated.data().begin() + 20);
  EXPECT_EQ(frame_spatial_feature(g, mlp, g.input(duplicated), 1).value().storage(), base.storage());

  const Tensor single = frame_spatial_feature(g, mlp, g.input(regions.reshaped({4, 5})), 4).value();
  const Tensor direct = relu(mlp(g, g.input(regions))).value();
  EXPECT_EQ(single.storage(), direct.storage());
  EXPECT_THROW(frame_spatial_feature(g, mlp, g.input(regions), 3), DimensionError);
}

TEST(TemporalPosition, ZeroPositionAndKnownValues) {
  const Tensor tp0 = temporal_position_encoding(0, 8);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(tp0[2 * j], 0.0);
    EXPECT_EQ(tp0[2 * j + 1], 1.0);
  }
  const Tensor tp = temporal_position_encoding(1, 4);
  EXPECT_DOUBLE_EQ(tp[0], std::sin(1.0));
  EXPECT_DOUBLE_EQ(tp[1], std::cos(1.0));
  EXPECT_NEAR(tp[2], std::sin(1.0 / std::sqrt(10000.0)), 1e-15);
  EXPECT_NEAR(tp[3], std::cos(1.0 / std::sqrt(10000.0)), 1e-15);
  EXPECT_THROW(temporal_position_encoding(1, 7), ContractError);
}

TEST(TemporalPosition, PairsLieOnUnitCircleAndPositionsDiffer) {
  for (std::size_t m3 : {16u, 256u}) {
    const Tensor table = temporal_position_table(24, m3);
    for (std::size_t t = 0; t < 24; ++t) {
      for (std::size_t j = 0; j < m3 / 2; ++j) {
        const double s = table[t * m3 + 2 * j], c = table[t * m3 + 2 * j + 1];
        EXPECT_NEAR(s * s + c * c, 1.0, 1e-12);
      }
      if (t > 0) {
        const auto row = [&](std::size_t r) {
          return std::vector<double>(table.data().begin() + r * m3, table.data().begin() + (r + 1) * m3);
        };
        EXPECT_NE(row(t), row(t - 1));
      }
    }
  }
}

TEST(FrameTemporalFeature, IdentityMlpAndPositionDependence) {
  ParameterStore store;
  Rng init(10);
  Linear mlp = make_linear(store, "ft", 6, 6, init);
  mlp.weight->value = Tensor::identity(6);
  mlp.bias->value = Tensor({6});
  std::mt19937_64 rng(11);
  const Tensor fs = random_tensor({1, 6}, rng, 0.0, 1.0);
  Graph g;
  EXPECT_EQ(frame_temporal_feature(g, mlp, g.input(fs), g.input(Tensor({1, 6}))).value().storage(), fs.storage());

  Rng again(12);
  const Linear random_mlp = make_linear(store, "ft2", 6, 6, again);
  const Var a = frame_temporal_feature(g, random_mlp, g.input(fs), g.input(temporal_position_encoding(1, 6).reshaped({1, 6})));
  const Var b = frame_temporal_feature(g, random_mlp, g.input(fs), g.input(temporal_position_encoding(2, 6).reshaped({1, 6})));
  EXPECT_NE(a.value().storage(), b.value().storage());
  EXPECT_THROW(frame_temporal_feature(g, random_mlp, g.input(fs), g.input(Tensor({1, 4}))), DimensionError);
}

TEST(FrameTemporalFeature, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  const Tensor tp = temporal_position_encoding(3, 6).reshaped({1, 6});
  const double err = max_gradient_error(
      {random_tensor({1, 6}, rng), random_tensor({6, 6}, rng), random_tensor({6}, rng)},
      [&](Graph& g, const std::vector<Var>& in) { return relu(affine(add(in[0], g.input(tp)), in[1], in[2])); });
  EXPECT_LT(err, 1e-6);
}

TEST(EncodeClip, ShapesAndSingleFrame) {
  Fixture fx;
  std::mt19937_64 rng(14);
  std::vector<std::vector<Vec3>> frames;
  for (int t = 0; t < 3; ++t) frames.push_back(random_points(48, rng, 0.7));
  const auto plans = plans_for(frames, fx.config);
  Graph g;
  const ClipEncoding enc = encode_clip(g, fx.weights, fx.config, plans);
  EXPECT_EQ(enc.regions.shape(), (Shape{15, 15}));
  EXPECT_EQ(enc.spatial.shape(), (Shape{3, 10}));
  EXPECT_EQ(enc.temporal.shape(), (Shape{3, 10}));
  const auto b = bundles(enc);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[2].t, 2u);
  EXPECT_EQ(b[1].regions.shape(), (Shape{5, 15}));
  for (double v : enc.regions.value().data()) EXPECT_TRUE(std::isfinite(v));

  const ClipEncoding one = encode_clip(g, fx.weights, fx.config, std::span(plans).first(1));
  const Var expected = frame_temporal_feature(g, fx.weights.temporal, one.spatial,
                                              g.input(temporal_position_encoding(0, 10).reshaped({1, 10})));
  expect_all_near(one.temporal.value(), expected.value(), 1e-14);
}

TEST(EncodeClip, FullSizeShapes) {
  EncoderConfig c;
  ParameterStore store;
  Rng init(1);
  const EncoderWeights w = make_encoder_weights(store, c, init);
  std::mt19937_64 rng(15);
  std::vector<std::vector<Vec3>> frames;
  for (int t = 0; t < 2; ++t) frames.push_back(random_points(512, rng));
  Graph g;
  const ClipEncoding enc = encode_clip(g, w, c, plans_for(frames, c));
  EXPECT_EQ(enc.regions.shape(), (Shape{2 * 32, 131}));
  EXPECT_EQ(enc.spatial.shape(), (Shape{2, 256}));
}

TEST(EncodeClip, FrameOrderOnlyChangesTemporalFeatures) {
  Fixture fx;
  std::mt19937_64 rng(16);
  std::vector<std::vector<Vec3>> frames;
  for (int t = 0; t < 3; ++t) frames.push_back(random_points(48, rng, 0.7));
  std::vector<std::vector<Vec3>> reversed(frames.rbegin(), frames.rend());
  Graph g;
  const ClipEncoding a = encode_clip(g, fx.weights, fx.config, plans_for(frames, fx.config));
  const ClipEncoding b = encode_clip(g, fx.weights, fx.config, plans_for(reversed, fx.config));
  const auto ba = bundles(a), bb = bundles(b);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_EQ(ba[t].spatial.storage(), bb[2 - t].spatial.storage());
    EXPECT_EQ(ba[t].regions.storage(), bb[2 - t].regions.storage());
  }
  EXPECT_NE(ba[0].temporal.storage(), bb[2].temporal.storage());
}

TEST(EncodeClip, WeightsSharedAcrossClips) {
  Fixture fx;
  std::mt19937_64 rng(17);
  const auto x = random_points(48, rng, 0.7), y = random_points(48, rng, 0.7), z = random_points(48, rng, 0.7);
  Graph g;
  const auto first = bundles(encode_clip(g, fx.weights, fx.config, plans_for({x, y}, fx.config)));
  const auto second = bundles(encode_clip(g, fx.weights, fx.config, plans_for({z, y, x}, fx.config)));
  EXPECT_EQ(first[0].spatial.storage(), second[2].spatial.storage());
  EXPECT_EQ(first[1].spatial.storage(), second[1].spatial.storage());
}

TEST(PlanFrame, WrongPointCountRejected) {
  Fixture fx;
  std::mt19937_64 rng(18);
  EXPECT_THROW(plan_frame(random_points(47, rng), fx.config), ContractError);
}
