#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hypmil/autodiff.hpp"

namespace hypmil::ad {

// Builds a scalar root from leaves created for `params` (in the same order).
using ScalarFn = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_entry = 0;
  std::size_t entries_checked = 0;
};

// Compares reverse-mode gradients with central differences for every entry
// of every tensor in `params` that requires a gradient. The error of one
// entry is |analytic - numeric| / max(1, |numeric|).
GradCheckReport gradient_check(const ScalarFn& f, std::span<const Tensor> params, double h = 1e-5);

double finite_difference_check(const ScalarFn& f, std::span<const Tensor> params, double h = 1e-5);

}  // namespace hypmil::ad
