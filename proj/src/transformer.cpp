#include "tmdpt/transformer.hpp"

#include <cmath>

#include "tmdpt/errors.hpp"

namespace tmdpt {

namespace {

LayerNormWeights make_layer_norm(ParameterStore& store, const std::string& name, std::size_t width) {
  return {&store.add(name + ".gamma", Tensor::full({width}, 1.0)), &store.add(name + ".beta", Tensor({width}))};
}

std::size_t token_width(const TransformerConfig& config, const FeatureLayout& layout) {
  if (config.enabled) return config.d_model;
  return config.input == TransformerInput::MotionOnly ? layout.frame_width : layout.width();
}

}  // namespace

HeadWeights make_head_weights(ParameterStore& store, const TransformerConfig& config, const FeatureLayout& layout,
                              std::size_t tokens, Rng& rng) {
  if (config.heads == 0 || config.d_model % config.heads != 0) {
    throw ConfigError("d_model " + std::to_string(config.d_model) + " is not divisible by " +
                      std::to_string(config.heads) + " heads");
  }
  HeadWeights w;
  const std::size_t in = config.input == TransformerInput::MotionOnly ? layout.frame_width : layout.width();
  if (config.enabled) {
    const std::size_t d = config.d_model;
    w.projection = make_linear(store, "head.projection", in, d, rng);
    for (std::size_t b = 0; b < config.blocks; ++b) {
      const std::string p = "head.block" + std::to_string(b);
      BlockWeights block;
      block.attention.wq = make_linear(store, p + ".attn.wq", d, d, rng, false);
      block.attention.wk = make_linear(store, p + ".attn.wk", d, d, rng, false);
      block.attention.wv = make_linear(store, p + ".attn.wv", d, d, rng, false);
      block.attention.wo = make_linear(store, p + ".attn.wo", d, d, rng);
      block.attention.heads = config.heads;
      block.norm1 = make_layer_norm(store, p + ".norm1", d);
      block.ff1 = make_linear(store, p + ".ffn1", d, config.feed_forward_width(), rng);
      block.ff2 = make_linear(store, p + ".ffn2", config.feed_forward_width(), d, rng);
      block.norm2 = make_layer_norm(store, p + ".norm2", d);
      w.blocks.push_back(block);
    }
  }
  const std::size_t tw = token_width(config, layout);
  std::size_t compressed = tw;
  if (config.output_aggregation == OutputAggregation::Mlp) {
    w.compress = make_linear(store, "head.compress", tokens * tw, config.d_model, rng);
    compressed = config.d_model;
  }
  w.classifier = make_linear(store, "head.classifier", compressed + layout.width(), config.num_classes, rng);
  return w;
}

Var input_projection(Graph& g, const Linear& projection, Var s) { return projection(g, s); }

Var multi_head_self_attention(Graph& g, const AttentionWeights& weights, Var tokens, std::vector<Tensor>* attention) {
  const std::size_t d = weights.wq.out;
  const std::size_t dk = d / weights.heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  Var q = weights.wq(g, tokens);
  Var k = weights.wk(g, tokens);
  Var v = weights.wv(g, tokens);
  std::vector<Var> heads;
  heads.reserve(weights.heads);
  for (std::size_t h = 0; h < weights.heads; ++h) {
    const std::size_t lo = h * dk, hi = lo + dk;
    Var qh = weights.heads == 1 ? q : slice(q, 1, lo, hi);
    Var kh = weights.heads == 1 ? k : slice(k, 1, lo, hi);
    Var vh = weights.heads == 1 ? v : slice(v, 1, lo, hi);
    Var a = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_dk));
    if (attention) attention->push_back(a.value());
    heads.push_back(matmul(a, vh));
  }
  Var u = heads.size() == 1 ? heads.front() : concat(heads, 1);
  return weights.wo(g, u);
}

Var transformer_block(Graph& g, const BlockWeights& w, Var tokens, std::vector<Tensor>* attention) {
  Var x = layer_norm(add(tokens, multi_head_self_attention(g, w.attention, tokens, attention)),
                     g.param(*w.norm1.gamma), g.param(*w.norm1.beta));
  Var ffn = w.ff2(g, relu(w.ff1(g, x)));
  return layer_norm(add(x, ffn), g.param(*w.norm2.gamma), g.param(*w.norm2.beta));
}

Var classify(Graph& g, const HeadWeights& weights, OutputAggregation aggregation, Var transformed, Var global) {
  Var compressed;
  if (aggregation == OutputAggregation::Mlp) {
    if (!weights.compress) throw ContractError("MLP output aggregation needs compression weights");
    const std::size_t n = transformed.value().numel();
    if (n != weights.compress->in) {
      throw DimensionError("transformed features " + shape_str(transformed.shape()) + " do not match compression input " +
                           std::to_string(weights.compress->in));
    }
    compressed = relu((*weights.compress)(g, reshape(transformed, {1, n})));
  } else {
    Var pooled = max_reduce(transformed, 0);
    compressed = reshape(pooled, {1, pooled.shape()[0]});
  }
  return weights.classifier(g, concat({compressed, global}, 1));
}

HeadOutput run_head(Graph& g, const HeadWeights& weights, const TransformerConfig& config, const IntegratedFeature& s,
                    bool capture_attention) {
  HeadOutput out;
  Var x = s.rows;
  if (config.input == TransformerInput::MotionOnly) x = slice(x, 1, s.layout.m_offset(), s.layout.width());
  if (weights.projection) x = input_projection(g, *weights.projection, x);
  for (const BlockWeights& block : weights.blocks) {
    x = transformer_block(g, block, x, capture_attention ? &out.attention : nullptr);
  }
  out.tokens = x;
  Var global = s.segments == 0 ? s.rows : slice(s.rows, 0, 0, 1);
  out.logits = classify(g, weights, config.output_aggregation, x, global);
  return out;
}

}  // namespace tmdpt
