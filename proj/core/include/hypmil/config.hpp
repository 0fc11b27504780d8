#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "hypmil/lorentz.hpp"

namespace hypmil {

struct LossConfig {
  double tau = 0.05;
  double alpha = 0.1;
  double beta_ent = 0.8;
  double beta_con = 0.8;
  double lambda_a = 1.0;
  double lambda_s = 10.0;
  std::size_t top_k = 8;
  // Lower bound applied to the exterior angle inside the contradiction loss.
  double theta_floor = 1e-8;

  void validate() const;
};

struct TrainConfig {
  double lr = 2e-4;
  std::size_t epochs = 20;
  std::uint64_t seed = 7;
  LossConfig loss;
  bool shared_aggregator = false;
  std::size_t embed_dim = 16;
  // 0 means "same as the input feature dimension".
  std::size_t hidden_dim = 0;
  double curvature = 1.0;
  std::size_t val_every = 1;
  std::size_t grad_accum = 1;
  // Fraction of slide steps that may be skipped for degenerate geometry.
  double max_skip_fraction = 0.01;

  void validate() const;
  lorentz::GeometryConfig geometry() const;
};

// A JSON object with any subset of the keys lr, epochs, seed, tau, alpha,
// beta_ent, beta_con, lambda_a, lambda_s, top_k, shared_aggregator, k,
// d_hidden, curvature, val_every, grad_accum. Missing keys take the defaults
// above; unknown keys raise ErrorCode::kConfig.
TrainConfig parse_train_config(const std::string& json_text);
TrainConfig load_train_config(const std::string& path);
std::string to_json(const TrainConfig& cfg);

}  // namespace hypmil
