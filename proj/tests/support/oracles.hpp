#pragma once

// Brute-force reference implementations used by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tmdpt/pointcloud_io.hpp"

namespace tmdpt::oracle {

// Greedy k-center by exhaustive recomputation of every min distance at every step.
inline std::vector<std::uint32_t> greedy_fps(const std::vector<Vec3>& pts, std::size_t k) {
  std::vector<std::uint32_t> picked{0};
  while (picked.size() < k) {
    double best = -1.0;
    std::uint32_t best_i = 0;
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
      if (std::find(picked.begin(), picked.end(), i) != picked.end()) continue;
      double d = std::numeric_limits<double>::infinity();
      for (std::uint32_t j : picked) {
        const Vec3 a = pts[i], b = pts[j];
        d = std::min(d, std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z)));
      }
      if (d > best) {
        best = d;
        best_i = i;
      }
    }
    picked.push_back(best_i);
  }
  return picked;
}

// Indices within radius of centroid c, centroid first, then ascending, truncated to K.
inline std::vector<std::uint32_t> ball_members(const std::vector<Vec3>& pts, std::uint32_t c, double radius,
                                               std::size_t k) {
  std::vector<std::uint32_t> out{c};
  for (std::uint32_t i = 0; i < pts.size() && out.size() < k; ++i) {
    if (i == c) continue;
    const Vec3 a = pts[i], b = pts[c];
    const double d2 = (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z);
    if (d2 <= radius * radius) out.push_back(i);
  }
  return out;
}

// Upper 99% quantile of chi-square with df degrees of freedom (Wilson-Hilferty).
inline double chi_square_99(double df) {
  const double z = 2.326347874040841;
  const double a = 2.0 / (9.0 * df);
  return df * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

// Pooled chi-square statistic of in-interval choices from repeated interval sampling.
// counts[i][j] = how often offset j inside interval i was chosen over `draws` draws.
inline double interval_chi_square(const std::vector<std::vector<std::size_t>>& counts, std::size_t draws,
                                  std::size_t* df) {
  double stat = 0.0;
  *df = 0;
  for (const auto& row : counts) {
    if (row.size() < 2) continue;
    const double expected = static_cast<double>(draws) / static_cast<double>(row.size());
    for (std::size_t c : row) stat += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
    *df += row.size() - 1;
  }
  return stat;
}

}  // namespace tmdpt::oracle
