#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tmdpt {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double squared_distance(Vec3 a, Vec3 b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

// Depth raster in the ".dep" format:
//   magic "DEPH", u32 width, u32 height, 8 x f32 header (fx, fy, cx, cy, 4 reserved),
//   then width*height little-endian u16 depths in millimeters, row-major. 0 = no reading.
struct DepthFrame {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  float fx = 0.0f, fy = 0.0f, cx = 0.0f, cy = 0.0f;
  std::array<float, 4> reserved{};
  std::vector<std::uint16_t> depth;

  std::uint16_t at(std::uint32_t u, std::uint32_t v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  std::size_t valid_pixels() const;
  friend bool operator==(const DepthFrame&, const DepthFrame&) = default;
};

struct PointCloudFrame {
  std::vector<Vec3> points;
};

struct PointCloudVideo {
  std::vector<PointCloudFrame> frames;
  std::optional<std::uint32_t> label;
  std::string source_id;
};

inline constexpr std::uint32_t kUnlabeled = 0xFFFFFFFFu;

std::vector<std::uint8_t> encode_depth_frame(const DepthFrame& frame);
DepthFrame decode_depth_frame(std::span<const std::uint8_t> bytes);
DepthFrame read_depth_frame(const std::filesystem::path& path);
void write_depth_frame(const std::filesystem::path& path, const DepthFrame& frame);

// Pinhole back-projection; zero-depth pixels are skipped. Depth is converted from
// millimeters to meters. Throws DataError when no pixel carries a reading.
PointCloudFrame depth_to_points(const DepthFrame& frame);

// One point per occupied voxel, placed at the voxel center, ordered by (ix, iy, iz).
PointCloudFrame voxel_occupancy(const PointCloudFrame& frame, double voxel_size);

// A single affine map for the whole video: subtract the bounding-box center of all
// points over all frames and divide by half the largest bounding-box extent.
struct VideoNormalization {
  Vec3 center;
  double scale = 1.0;
};
VideoNormalization video_normalization(const PointCloudVideo& video);
PointCloudVideo normalize_video(const PointCloudVideo& video);

// Uniform sample without replacement when the frame has at least n points. Otherwise
// every point is kept once and the remainder is drawn uniformly with replacement.
PointCloudFrame random_downsample(const PointCloudFrame& frame, std::size_t n, std::uint64_t seed);

// ".pcv": magic "PCV1", u32 frame count, u32 label (0xFFFFFFFF = unlabeled), then per
// frame u32 point count and count x 3 little-endian f32 coordinates.
std::vector<std::uint8_t> encode_pcv(const PointCloudVideo& video);
PointCloudVideo decode_pcv(std::span<const std::uint8_t> bytes, std::string source_id = {});
void write_pcv(const std::filesystem::path& path, const PointCloudVideo& video);
PointCloudVideo read_pcv(const std::filesystem::path& path);

}  // namespace tmdpt
