#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tmdpt/config.hpp"

namespace tmdpt {

struct GradCheckEntry {
  std::string name;
  std::size_t index = 0;  // flat index inside the parameter tensor
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double loss = 0.0;
  double max_rel_err = 0.0;
  std::size_t parameter_tensors = 0;
  std::size_t parameter_scalars = 0;
  double seconds = 0.0;
};

struct GradCheckOptions {
  std::size_t samples = 20;  // at least one entry per parameter tensor is always added
  std::uint64_t seed = 1;
  double eps = 1e-6;
  double denominator_floor = 1e-8;
};

// rel_err = |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

// Full-model loss on one synthetic clip: analytic gradients from one backward pass against
// central differences (L(w + eps) - L(w - eps)) / 2eps for the sampled scalars.
GradCheckReport gradcheck(const RunConfig& config, const GradCheckOptions& options = {});

std::string format_report(const GradCheckReport& report);

}  // namespace tmdpt
