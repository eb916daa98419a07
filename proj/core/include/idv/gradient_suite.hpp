#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "idv/grad_check.hpp"

namespace idv {

struct GradientSuiteOptions {
  std::uint64_t seed = 2024;
  std::size_t instances = 20;
  double step = 1e-4;
  double tolerance = 1e-4;
  double denominator_floor = 1e-5;
};

struct GradientCase {
  std::string name;
  std::size_t instance = 0;
  GradCheckReport report;
};

struct GradientSuiteReport {
  std::vector<GradientCase> cases;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_nonsmooth = 0;
  bool passed = true;
  double seconds = 0.0;

  std::string summary() const;
};

/// Names of the cases run per instance: every differentiable op, each loss,
/// and the full identification+verification pair objective for flatten and
/// MAC pooling.
std::vector<std::string> gradient_case_names();

GradientSuiteReport run_gradient_suite(const GradientSuiteOptions& options = {});

}  // namespace idv
