#pragma once

#include <vector>

#include "tmdpt/aggregator.hpp"
#include "tmdpt/config.hpp"
#include "tmdpt/params.hpp"

namespace tmdpt {

// Combined per-head projections: column block h of wq/wk/wv (width d_model / heads)
// is head h's M_q / M_k / M_v.
struct AttentionWeights {
  Linear wq;
  Linear wk;
  Linear wv;
  Linear wo;  // output affine after the head concat
  std::size_t heads = 1;
};

struct LayerNormWeights {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;
};

struct BlockWeights {
  AttentionWeights attention;
  LayerNormWeights norm1;
  Linear ff1;
  Linear ff2;
  LayerNormWeights norm2;
};

struct HeadWeights {
  std::optional<Linear> projection;  // absent when the transformer is disabled
  std::vector<BlockWeights> blocks;
  std::optional<Linear> compress;  // MLP output aggregation only
  Linear classifier;               // [compressed | S_g] -> C
};

// tokens: number of rows of the integrated feature (ts + 1, or 1 without the partial stream).
HeadWeights make_head_weights(ParameterStore& store, const TransformerConfig& config, const FeatureLayout& layout,
                              std::size_t tokens, Rng& rng);

Var input_projection(Graph& g, const Linear& projection, Var s);

// Optional capture receives one [T, T] attention matrix per head.
Var multi_head_self_attention(Graph& g, const AttentionWeights& weights, Var tokens,
                              std::vector<Tensor>* attention = nullptr);

// Post-norm: x = LN(x + MHSA(x)); x = LN(x + FFN(x)).
Var transformer_block(Graph& g, const BlockWeights& weights, Var tokens, std::vector<Tensor>* attention = nullptr);

Var classify(Graph& g, const HeadWeights& weights, OutputAggregation aggregation, Var transformed, Var global);

struct HeadOutput {
  Var logits;                     // [1, C]
  Var tokens;                     // transformer output rows
  std::vector<Tensor> attention;  // per block, per head, when captured
};

HeadOutput run_head(Graph& g, const HeadWeights& weights, const TransformerConfig& config, const IntegratedFeature& s,
                    bool capture_attention = false);

}  // namespace tmdpt
