#pragma once

// Per-slide objective assembly and the (strictly single-threaded) Adam
// training loop.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hypmil/autodiff.hpp"
#include "hypmil/config.hpp"
#include "hypmil/data.hpp"
#include "hypmil/losses.hpp"
#include "hypmil/model.hpp"

namespace hypmil::training {

// Top-K patches (global index over the bag) and regions by cosine
// similarity of raw features to the label-class base vector; K is
// truncated to what the bag holds. Ties keep the lower index.
losses::Selection select_top_k(const data::FeatureBag& bag, const ad::Tensor& class_base, std::size_t label,
                               std::size_t k);

model::ModelDims dims_for(const data::FeatureBundle& bundle, const TrainConfig& cfg);
model::ModelParams initial_params(const data::FeatureBundle& bundle, const TrainConfig& cfg);

struct SlideStep {
  double total = 0.0;
  double cls = 0.0;
  double ama = 0.0;
  double shc = 0.0;
  std::size_t empty_levels = 0;
  // Aligned with ModelParams::trainable(); empty when gradients were not
  // requested.
  std::vector<ad::Tensor> grads;
};

// Forward (and optionally backward) of the full objective on one slide.
// Degenerate geometry propagates as kDegenerateInput.
SlideStep slide_step(const data::FeatureBag& bag, const model::ModelParams& params, const TrainConfig& cfg,
                     bool with_grad = true);

struct EpochLog {
  std::size_t epoch = 0;      // 1-based
  double train_loss = 0.0;    // mean over the epoch's non-skipped steps
  double val_auc = -1.0;      // -1 when not evaluated or undefined
  double val_f1 = -1.0;
  double val_nll = -1.0;      // mean -log p(label); -1 when not evaluated
  std::size_t skipped = 0;
};

struct TrainResult {
  model::ModelParams final_params;
  // Best validation epoch (AUC, ties broken by lower validation NLL); the
  // final parameters when there is no validation set.
  model::ModelParams best_params;
  std::size_t best_epoch = 0;
  double initial_loss = 0.0;  // mean train objective at initialisation
  std::vector<EpochLog> log;
  std::size_t steps = 0;
  std::size_t skipped = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Train ids are sorted, then shuffled each epoch by a generator seeded from
// cfg.seed. Fails with kTooManySkips when more than
// cfg.max_skip_fraction of slide steps hit degenerate geometry.
TrainResult train(const data::FeatureBundle& bundle, const std::vector<std::string>& train_ids,
                  const std::vector<std::string>& val_ids, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct GradSuiteEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t trials = 0;
  std::size_t nan_trials = 0;  // trials where a perturbed evaluation was non-finite
};

// Central-difference gradient checks (h = 1e-5) of the alignment, entailment,
// contradiction and classification losses, attention aggregation and the
// full objective on random tiny models (D_in 8, k 4, 2 classes, 2 regions x
// 3 patches). One entry per target, in that order.
std::vector<GradSuiteEntry> gradient_suite(std::size_t trials, std::uint64_t seed);

// Bags by slide id; kInvalidArgument for an unknown id.
std::vector<const data::FeatureBag*> lookup(const data::FeatureBundle& bundle, const std::vector<std::string>& ids);

}  // namespace hypmil::training
