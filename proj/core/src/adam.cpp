#include "hypmil/adam.hpp"

#include <cmath>

#include "hypmil/error.hpp"

namespace hypmil {

AdamState AdamState::like(std::span<ad::Tensor* const> params) {
  AdamState s;
  for (const auto* p : params) {
    s.m.emplace_back(p->shape(), 0.0);
    s.v.emplace_back(p->shape(), 0.0);
  }
  return s;
}

void adam_step(std::span<ad::Tensor* const> params, std::span<const ad::Tensor> grads, AdamState& state, double lr,
               std::span<const std::string> names) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw Error(ErrorCode::kShapeMismatch, "adam: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name = i < names.size() ? names[i] : "param[" + std::to_string(i) + "]";
    if (params[i]->shape() != grads[i].shape() || params[i]->shape() != state.m[i].shape()) {
      throw Error(ErrorCode::kShapeMismatch, "adam: shape mismatch for " + name + ": param " +
                                                 ad::shape_str(params[i]->shape()) + ", grad " +
                                                 ad::shape_str(grads[i].shape()));
    }
    if (!grads[i].all_finite()) throw Error(ErrorCode::kNonFinite, "adam: non-finite gradient for " + name);
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    auto g = grads[i].values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.eps);
    }
  }
}

}  // namespace hypmil
