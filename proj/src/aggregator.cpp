#include "tmdpt/aggregator.hpp"

#include <cmath>
#include <string>

#include "tmdpt/errors.hpp"

namespace tmdpt {

std::vector<FrameRange> temporal_split(std::size_t q, const SplitSpec& spec) {
  const std::size_t u = spec.segment_frames;
  if (u == 0 || u > q) throw ContractError("segment_frames must be in [1, " + std::to_string(q) + "]");
  if (spec.overlap < 0.0 || spec.overlap >= 1.0) throw ContractError("segment overlap must be in [0, 1)");
  const double stride_real = static_cast<double>(u) * (1.0 - spec.overlap);
  const auto stride = static_cast<std::size_t>(std::llround(stride_real));
  if (stride == 0 || std::abs(stride_real - static_cast<double>(stride)) > 1e-9) {
    throw ContractError("segment stride segment_frames x (1 - overlap) must be a positive whole number");
  }
  if ((q - u) % stride != 0) throw ContractError("segments with this stride do not end at frame " + std::to_string(q));
  const std::size_t count = (q - u) / stride + 1;
  if (spec.segments != 0 && spec.segments != count) {
    throw ContractError(std::to_string(spec.segments) + " segments of " + std::to_string(u) +
                        " frames do not tile a " + std::to_string(q) + "-frame clip (expected " +
                        std::to_string(count) + ")");
  }
  std::vector<FrameRange> ranges;
  for (std::size_t i = 0; i < count; ++i) ranges.push_back({i * stride, i * stride + u});
  return ranges;
}

FeatureLayout feature_layout(const EncoderConfig& config) {
  return {config.region_width(), config.frame_feature_width};
}

namespace {

Var row_of(Var v) { return reshape(v, {1, v.shape()[0]}); }

Var aggregate_range(const ClipEncoding& e, FrameRange range, bool literal_partial_motion) {
  if (range.size() == 0 || range.end > e.frames) throw ContractError("aggregation range must be nonempty and inside the clip");
  const std::size_t n2 = e.regions_per_frame;
  const bool whole = range.begin == 0 && range.end == e.frames;
  Var regions = whole ? e.regions : slice(e.regions, 0, range.begin * n2, range.end * n2);
  Var spatial = whole ? e.spatial : slice(e.spatial, 0, range.begin, range.end);
  Var temporal = whole ? e.temporal : slice(e.temporal, 0, range.begin, range.end);
  Var l = max_reduce(regions, 0);
  Var a = max_reduce(spatial, 0);
  Var m = literal_partial_motion ? a : max_reduce(temporal, 0);
  return row_of(concat({l, a, m}, 0));
}

ClipEncoding encoding_from_bundles(Graph& g, std::span<const FrameFeatureBundle> bundles) {
  if (bundles.empty()) throw ContractError("aggregation needs at least one frame");
  const std::size_t n2 = bundles[0].regions.rows(), rw = bundles[0].regions.cols();
  const std::size_t m3 = bundles[0].spatial.numel();
  Tensor regions({bundles.size() * n2, rw}), spatial({bundles.size(), m3}), temporal({bundles.size(), m3});
  for (std::size_t t = 0; t < bundles.size(); ++t) {
    const FrameFeatureBundle& b = bundles[t];
    if (b.regions.shape() != Shape{n2, rw} || b.spatial.numel() != m3 || b.temporal.numel() != m3) {
      throw DimensionError("frame bundles have inconsistent shapes");
    }
    std::copy(b.regions.data().begin(), b.regions.data().end(), regions.data().begin() + t * n2 * rw);
    std::copy(b.spatial.data().begin(), b.spatial.data().end(), spatial.data().begin() + t * m3);
    std::copy(b.temporal.data().begin(), b.temporal.data().end(), temporal.data().begin() + t * m3);
  }
  ClipEncoding e;
  e.frames = bundles.size();
  e.regions_per_frame = n2;
  e.regions = g.input(std::move(regions));
  e.spatial = g.input(std::move(spatial));
  e.temporal = g.input(std::move(temporal));
  return e;
}

}  // namespace

Var aggregate_global(const ClipEncoding& encoding) { return aggregate_range(encoding, {0, encoding.frames}, false); }

Var aggregate_partial(const ClipEncoding& encoding, FrameRange range, bool literal_partial_motion) {
  return aggregate_range(encoding, range, literal_partial_motion);
}

IntegratedFeature integrate(Var global, const std::vector<Var>& partials, const FeatureLayout& layout) {
  const Shape row{1, layout.width()};
  if (global.shape() != row) throw DimensionError("global feature " + shape_str(global.shape()) + " is not " + shape_str(row));
  std::vector<Var> parts{global};
  for (const Var& p : partials) {
    if (p.shape() != row) throw DimensionError("partial feature " + shape_str(p.shape()) + " is not " + shape_str(row));
    parts.push_back(p);
  }
  IntegratedFeature s;
  s.rows = parts.size() == 1 ? global : concat(parts, 0);
  s.layout = layout;
  s.segments = partials.size();
  return s;
}

IntegratedFeature aggregate_clip(const ClipEncoding& encoding, const FeatureLayout& layout, const SplitSpec& split) {
  Var global = aggregate_global(encoding);
  std::vector<Var> partials;
  if (split.two_stream) {
    for (const FrameRange& r : temporal_split(encoding.frames, split)) {
      partials.push_back(aggregate_partial(encoding, r, split.partial_motion_literal));
    }
  }
  return integrate(global, partials, layout);
}

Tensor aggregate_global(std::span<const FrameFeatureBundle> bundles) {
  Graph g;
  Var row = aggregate_global(encoding_from_bundles(g, bundles));
  return row.value().reshaped({row.shape()[1]});
}

Tensor aggregate_partial(std::span<const FrameFeatureBundle> bundles, FrameRange range, bool literal_partial_motion) {
  Graph g;
  Var row = aggregate_partial(encoding_from_bundles(g, bundles), range, literal_partial_motion);
  return row.value().reshaped({row.shape()[1]});
}

Tensor integrate(const Tensor& global, std::span<const Tensor> partials) {
  const std::size_t d = global.numel();
  Tensor out({partials.size() + 1, d});
  std::copy(global.data().begin(), global.data().end(), out.data().begin());
  for (std::size_t i = 0; i < partials.size(); ++i) {
    if (partials[i].numel() != d) throw DimensionError("partial feature length differs from the global feature");
    std::copy(partials[i].data().begin(), partials[i].data().end(), out.data().begin() + (i + 1) * d);
  }
  return out;
}

}  // namespace tmdpt
