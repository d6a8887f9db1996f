#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tmdpt/pointcloud_io.hpp"
#include "tmdpt/tensor.hpp"

namespace tmdpt {

// Local regions around sampled centroids. group_indices holds groups() x group_size
// point indices; slot 0 of every group is the centroid itself.
struct GroupSpec {
  std::vector<std::uint32_t> centroid_indices;
  std::vector<std::uint32_t> group_indices;
  double radius = 0.0;
  std::size_t group_size = 0;

  std::size_t groups() const { return centroid_indices.size(); }
  std::span<const std::uint32_t> group(std::size_t g) const {
    return std::span<const std::uint32_t>(group_indices).subspan(g * group_size, group_size);
  }
};

// Greedy k-center selection seeded at index 0. Each later pick maximizes the minimum
// distance to the points already picked; ties go to the lowest index.
std::vector<std::uint32_t> farthest_point_sampling(std::span<const Vec3> points, std::size_t k);

// Up to group_size members with distance <= radius per centroid: the centroid first,
// then other in-ball points in ascending index order. Short groups are padded with the
// centroid's nearest in-ball neighbor, or with the centroid when it is alone.
GroupSpec ball_query(std::span<const Vec3> points, std::span<const std::uint32_t> centroids, double radius,
                     std::size_t group_size);

// [groups, group_size, 4 + f]: local xyz relative to the centroid, distance to the
// centroid, then the member's feature row when features are given ([n, f]).
Tensor group_and_localize(std::span<const Vec3> points, const Tensor* features, const GroupSpec& spec);

// Groups with padding duplicates collapsed: each distinct member appears once, in
// first-occurrence order, weighted by its multiplicity / group_size. Max-pooling over a
// compact group equals max-pooling over the padded group and the weighted sum equals the
// padded mean.
struct CompactGroups {
  std::vector<std::uint32_t> offsets;  // groups + 1 entries
  std::vector<std::uint32_t> members;  // point index per row
  std::vector<double> weights;         // multiplicity / group_size per row
};
CompactGroups compact_groups(const GroupSpec& spec);

// [members, 4] geometric channels (local xyz, distance) for each compact row.
Tensor localize_compact(std::span<const Vec3> points, const GroupSpec& spec, const CompactGroups& compact);

}  // namespace tmdpt
