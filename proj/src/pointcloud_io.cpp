#include "tmdpt/pointcloud_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "tmdpt/binary_io.hpp"
#include "tmdpt/random.hpp"

namespace tmdpt {

std::size_t DepthFrame::valid_pixels() const {
  return static_cast<std::size_t>(std::count_if(depth.begin(), depth.end(), [](std::uint16_t d) { return d != 0; }));
}

std::vector<std::uint8_t> encode_depth_frame(const DepthFrame& frame) {
  if (frame.depth.size() != static_cast<std::size_t>(frame.width) * frame.height) {
    throw ContractError("depth array length does not match width x height");
  }
  ByteWriter w;
  w.bytes("DEPH");
  w.u32(frame.width);
  w.u32(frame.height);
  for (float v : {frame.fx, frame.fy, frame.cx, frame.cy}) w.f32(v);
  for (float v : frame.reserved) w.f32(v);
  for (std::uint16_t d : frame.depth) w.u16(d);
  return w.buffer();
}

DepthFrame decode_depth_frame(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "depth frame");
  r.expect_magic("DEPH");
  DepthFrame f;
  f.width = r.u32();
  f.height = r.u32();
  f.fx = r.f32();
  f.fy = r.f32();
  f.cx = r.f32();
  f.cy = r.f32();
  for (float& v : f.reserved) v = r.f32();
  const std::size_t n = static_cast<std::size_t>(f.width) * f.height;
  r.need(n * 2);
  f.depth.resize(n);
  for (auto& d : f.depth) d = r.u16();
  if (r.remaining() != 0) throw FormatError("depth frame has trailing bytes");
  return f;
}

DepthFrame read_depth_frame(const std::filesystem::path& path) { return decode_depth_frame(read_file_bytes(path)); }

void write_depth_frame(const std::filesystem::path& path, const DepthFrame& frame) {
  write_file_bytes(path, encode_depth_frame(frame));
}

PointCloudFrame depth_to_points(const DepthFrame& frame) {
  if (frame.fx == 0.0f || frame.fy == 0.0f) throw DataError("depth frame has zero focal length");
  PointCloudFrame out;
  for (std::uint32_t v = 0; v < frame.height; ++v) {
    for (std::uint32_t u = 0; u < frame.width; ++u) {
      const std::uint16_t raw = frame.at(u, v);
      if (raw == 0) continue;
      const double d = raw / 1000.0;
      out.points.push_back({(u - static_cast<double>(frame.cx)) * d / frame.fx,
                            (v - static_cast<double>(frame.cy)) * d / frame.fy, d});
    }
  }
  if (out.points.empty()) throw DataError("depth frame has no valid pixels");
  return out;
}

PointCloudFrame voxel_occupancy(const PointCloudFrame& frame, double voxel_size) {
  if (!(voxel_size > 0.0)) throw ContractError("voxel_size must be positive");
  using Cell = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  std::vector<Cell> cells;
  cells.reserve(frame.points.size());
  for (const Vec3& p : frame.points) {
    cells.emplace_back(static_cast<std::int64_t>(std::floor(p.x / voxel_size)),
                       static_cast<std::int64_t>(std::floor(p.y / voxel_size)),
                       static_cast<std::int64_t>(std::floor(p.z / voxel_size)));
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  PointCloudFrame out;
  out.points.reserve(cells.size());
  for (const auto& [ix, iy, iz] : cells) {
    out.points.push_back({(static_cast<double>(ix) + 0.5) * voxel_size, (static_cast<double>(iy) + 0.5) * voxel_size,
                          (static_cast<double>(iz) + 0.5) * voxel_size});
  }
  return out;
}

VideoNormalization video_normalization(const PointCloudVideo& video) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Vec3 lo{inf, inf, inf}, hi{-inf, -inf, -inf};
  std::size_t count = 0;
  for (const auto& frame : video.frames) {
    for (const Vec3& p : frame.points) {
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
      ++count;
    }
  }
  if (count == 0) throw DataError("cannot normalize a video without points");
  const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
  if (!(extent > 0.0)) throw DataError("degenerate geometry: all points identical in " + video.source_id);
  return {(lo + hi) * 0.5, extent / 2.0};
}

PointCloudVideo normalize_video(const PointCloudVideo& video) {
  const VideoNormalization norm = video_normalization(video);
  PointCloudVideo out = video;
  const double inv = 1.0 / norm.scale;
  for (auto& frame : out.frames) {
    for (Vec3& p : frame.points) p = (p - norm.center) * inv;
  }
  return out;
}

PointCloudFrame random_downsample(const PointCloudFrame& frame, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ContractError("random_downsample requires n >= 1");
  const std::size_t count = frame.points.size();
  if (count == 0) throw DataError("cannot downsample an empty frame");
  Rng rng(seed);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  PointCloudFrame out;
  out.points.reserve(n);
  if (count >= n) {
    for (std::size_t i = 0; i < n; ++i) out.points.push_back(frame.points[order[i]]);
    return out;
  }
  for (std::size_t i : order) out.points.push_back(frame.points[i]);
  std::uniform_int_distribution<std::size_t> pick(0, count - 1);
  while (out.points.size() < n) out.points.push_back(frame.points[pick(rng)]);
  return out;
}

std::vector<std::uint8_t> encode_pcv(const PointCloudVideo& video) {
  if (video.frames.empty()) throw ContractError("cannot write a video with no frames");
  ByteWriter w;
  w.bytes("PCV1");
  w.u32(static_cast<std::uint32_t>(video.frames.size()));
  w.u32(video.label.value_or(kUnlabeled));
  for (const auto& frame : video.frames) {
    w.u32(static_cast<std::uint32_t>(frame.points.size()));
    for (const Vec3& p : frame.points) {
      w.f32(static_cast<float>(p.x));
      w.f32(static_cast<float>(p.y));
      w.f32(static_cast<float>(p.z));
    }
  }
  return w.buffer();
}

PointCloudVideo decode_pcv(std::span<const std::uint8_t> bytes, std::string source_id) {
  ByteReader r(bytes, "pcv " + source_id);
  r.expect_magic("PCV1");
  PointCloudVideo video;
  video.source_id = std::move(source_id);
  const std::uint32_t frames = r.u32();
  if (frames == 0) throw FormatError("pcv has zero frames");
  const std::uint32_t label = r.u32();
  if (label != kUnlabeled) video.label = label;
  video.frames.resize(frames);
  for (auto& frame : video.frames) {
    const std::uint32_t count = r.u32();
    r.need(static_cast<std::size_t>(count) * 12);
    frame.points.resize(count);
    for (Vec3& p : frame.points) {
      p.x = r.f32();
      p.y = r.f32();
      p.z = r.f32();
    }
  }
  if (r.remaining() != 0) throw FormatError("pcv has trailing bytes");
  return video;
}

void write_pcv(const std::filesystem::path& path, const PointCloudVideo& video) { write_file_bytes(path, encode_pcv(video)); }

PointCloudVideo read_pcv(const std::filesystem::path& path) {
  return decode_pcv(read_file_bytes(path), path.stem().string());
}

}  // namespace tmdpt
