#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "idv/graph.hpp"
#include "idv/param_store.hpp"

namespace idv {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-6;
  // Denominator floor for the relative error |a - n| / max(|a| + |n|, floor).
  double denominator_floor = 1e-8;
  // 0 checks every element; otherwise a seeded random subsample per tensor.
  std::size_t max_elements_per_param = 0;
  std::uint64_t seed = 0;
};

struct ParamCheck {
  std::string name;
  std::size_t checked = 0;
  // Elements where a perturbation flipped a ReLU/pooling/hinge decision, so
  // the central difference straddles a kink and is not comparable.
  std::size_t skipped_nonsmooth = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  bool passed = true;

  /// Names of parameters that failed, in store order.
  std::vector<std::string> failures() const;
  std::string summary() const;
};

/// Builds the scalar loss on a fresh graph. Must be a pure function of the
/// current parameter values.
using LossBuilder = std::function<Var(Graph&)>;

/// Compares the reverse-mode gradient of `build` against central
/// differences (L(w+h) - L(w-h)) / 2h for the parameters in `params`.
/// Parameter values are restored before returning; grad buffers of `params`
/// are not modified. Throws if two identical evaluations disagree.
GradCheckReport grad_check(const LossBuilder& build, ParamStore& params,
                           const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric, double floor);

}  // namespace idv
