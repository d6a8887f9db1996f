#include "tmdpt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tmdpt/errors.hpp"

namespace tmdpt {

std::vector<std::uint32_t> farthest_point_sampling(std::span<const Vec3> points, std::size_t k) {
  const std::size_t n = points.size();
  if (k < 1 || k > n) {
    throw ContractError("farthest_point_sampling needs 1 <= k <= n (k=" + std::to_string(k) + ", n=" +
                        std::to_string(n) + ")");
  }
  std::vector<std::uint32_t> picks;
  picks.reserve(k);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<char> picked(n, 0);
  std::uint32_t current = 0;
  for (std::size_t i = 0; i < k; ++i) {
    picks.push_back(current);
    picked[current] = 1;
    const Vec3 c = points[current];
    double best = -1.0;
    std::uint32_t best_idx = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (picked[j]) continue;
      const double d = std::min(min_dist[j], squared_distance(points[j], c));
      min_dist[j] = d;
      if (d > best) {
        best = d;
        best_idx = static_cast<std::uint32_t>(j);
      }
    }
    current = best_idx;
  }
  return picks;
}

GroupSpec ball_query(std::span<const Vec3> points, std::span<const std::uint32_t> centroids, double radius,
                     std::size_t group_size) {
  if (!(radius > 0.0)) throw ContractError("ball_query radius must be positive");
  if (group_size < 1) throw ContractError("ball_query group size must be >= 1");
  const double r2 = radius * radius;
  GroupSpec spec;
  spec.radius = radius;
  spec.group_size = group_size;
  spec.centroid_indices.assign(centroids.begin(), centroids.end());
  spec.group_indices.reserve(centroids.size() * group_size);
  std::vector<std::uint32_t> members;
  for (std::uint32_t c : centroids) {
    if (c >= points.size()) throw ContractError("ball_query centroid index out of range");
    const Vec3 center = points[c];
    members.clear();
    members.push_back(c);
    std::uint32_t nearest = c;
    double nearest_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < points.size() && members.size() < group_size; ++j) {
      if (j == c) continue;
      const double d2 = squared_distance(points[j], center);
      if (d2 > r2) continue;
      members.push_back(static_cast<std::uint32_t>(j));
      if (d2 < nearest_d2) {
        nearest_d2 = d2;
        nearest = static_cast<std::uint32_t>(j);
      }
    }
    while (members.size() < group_size) members.push_back(nearest);
    spec.group_indices.insert(spec.group_indices.end(), members.begin(), members.end());
  }
  return spec;
}

Tensor group_and_localize(std::span<const Vec3> points, const Tensor* features, const GroupSpec& spec) {
  std::size_t f = 0;
  if (features) {
    if (features->rank() != 2 || features->rows() != points.size()) {
      throw ContractError("group_and_localize: feature rows " + shape_str(features->shape()) +
                          " do not match point count " + std::to_string(points.size()));
    }
    f = features->cols();
  }
  const std::size_t channels = 4 + f;
  Tensor out({spec.groups(), spec.group_size, channels});
  auto od = out.data();
  for (std::size_t g = 0; g < spec.groups(); ++g) {
    const Vec3 center = points[spec.centroid_indices[g]];
    const auto group = spec.group(g);
    for (std::size_t s = 0; s < spec.group_size; ++s) {
      const Vec3 local = points[group[s]] - center;
      double* row = od.data() + (g * spec.group_size + s) * channels;
      row[0] = local.x;
      row[1] = local.y;
      row[2] = local.z;
      row[3] = std::sqrt(local.x * local.x + local.y * local.y + local.z * local.z);
      for (std::size_t c = 0; c < f; ++c) row[4 + c] = features->at(group[s], c);
    }
  }
  return out;
}

CompactGroups compact_groups(const GroupSpec& spec) {
  CompactGroups out;
  out.offsets.reserve(spec.groups() + 1);
  out.offsets.push_back(0);
  const double unit = 1.0 / static_cast<double>(spec.group_size);
  for (std::size_t g = 0; g < spec.groups(); ++g) {
    const std::size_t begin = out.members.size();
    for (std::uint32_t idx : spec.group(g)) {
      auto it = std::find(out.members.begin() + static_cast<std::ptrdiff_t>(begin), out.members.end(), idx);
      if (it == out.members.end()) {
        out.members.push_back(idx);
        out.weights.push_back(unit);
      } else {
        out.weights[static_cast<std::size_t>(it - out.members.begin())] += unit;
      }
    }
    out.offsets.push_back(static_cast<std::uint32_t>(out.members.size()));
  }
  return out;
}

Tensor localize_compact(std::span<const Vec3> points, const GroupSpec& spec, const CompactGroups& compact) {
  Tensor out({compact.members.size(), 4});
  for (std::size_t g = 0; g < spec.groups(); ++g) {
    const Vec3 center = points[spec.centroid_indices[g]];
    for (std::uint32_t r = compact.offsets[g]; r < compact.offsets[g + 1]; ++r) {
      const Vec3 local = points[compact.members[r]] - center;
      out.at(r, 0) = local.x;
      out.at(r, 1) = local.y;
      out.at(r, 2) = local.z;
      out.at(r, 3) = std::sqrt(local.x * local.x + local.y * local.y + local.z * local.z);
    }
  }
  return out;
}

}  // namespace tmdpt
