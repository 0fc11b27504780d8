#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hypmil/autodiff.hpp"

namespace hypmil {

// Bias-corrected Adam moments, one pair per parameter tensor.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<ad::Tensor> m;
  std::vector<ad::Tensor> v;

  // Zero moments shaped like `params`.
  static AdamState like(std::span<ad::Tensor* const> params);
};

// One update in place. `names` labels parameters in error messages; a
// non-finite gradient raises kNonFinite naming the parameter and leaves
// every parameter untouched.
void adam_step(std::span<ad::Tensor* const> params, std::span<const ad::Tensor> grads, AdamState& state, double lr,
               std::span<const std::string> names = {});

}  // namespace hypmil
