#pragma once

// Prediction, held-out metrics, the nested IND/OOD protocol, the four-way
// loss ablation and embedding export.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hypmil/config.hpp"
#include "hypmil/data.hpp"
#include "hypmil/model.hpp"
#include "hypmil/splits.hpp"

namespace hypmil::evaluation {

struct Prediction {
  std::vector<double> distances;  // d_G(slide, class text at slide level)
  std::vector<double> probs;      // softmax(-distances)
  std::size_t predicted = 0;
};

Prediction predict(const data::FeatureBag& bag, const model::ModelParams& params,
                   const lorentz::GeometryConfig& geo);

struct SetMetrics {
  std::size_t n = 0;
  std::optional<double> auc;  // empty when undefined (one class present)
  double f1 = 0.0;
  double nll = 0.0;  // mean -log p(label)
};

// Predictions are computed in parallel over `jobs` threads and reduced in
// the given order.
SetMetrics evaluate(const std::vector<const data::FeatureBag*>& bags, const model::ModelParams& params,
                    const lorentz::GeometryConfig& geo, std::size_t jobs = 1);

struct FoldResult {
  std::size_t outer = 0;
  std::size_t inner = 0;
  SetMetrics ind;
  std::optional<SetMetrics> ood;  // empty when the fold has no OOD sites
  std::size_t best_epoch = 0;
  std::size_t skipped = 0;
};

struct Cell {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t count = 0;
};

struct MetricReport {
  std::string name;
  std::vector<FoldResult> folds;  // ordered by (outer, inner)
  Cell ind_auc, ind_f1, ood_auc, ood_f1;

  void summarize();
  // One JSON object per fold per domain, plus the summary cells.
  std::string to_json() const;
  std::string summary_table() const;
};

struct ProtocolOptions {
  std::size_t n_outer = 3;
  std::size_t n_inner = 5;
  splits::SplitRatios ratios;
  // Fold trainings run concurrently, one thread each.
  std::size_t jobs = 1;
};

MetricReport run_protocol(const data::FeatureBundle& bundle, const ProtocolOptions& opts, const TrainConfig& cfg);
MetricReport run_protocol(const data::FeatureBundle& bundle, const splits::SplitPlan& plan, const TrainConfig& cfg,
                          std::size_t jobs = 1);

// (lambda_a, lambda_s) in {(0,0), (la,0), (0,ls), (la,ls)}, in that order.
std::vector<MetricReport> ablate(const data::FeatureBundle& bundle, const ProtocolOptions& opts,
                                 const TrainConfig& cfg);
std::string ablation_table(const std::vector<MetricReport>& reports);
std::string ablation_json(const std::vector<MetricReport>& reports);

struct RadialStats {
  double text = 0.0, slide = 0.0, region = 0.0, patch = 0.0;
};

// Mean distance from the origin per level over the given slides (text
// points once).
RadialStats radial_stats(const std::vector<const data::FeatureBag*>& bags, const model::ModelParams& params,
                         const lorentz::GeometryConfig& geo);

// CSV with header level,text_level,class,slide_id,distance,px,py: the
// N_C * 3 text points first (text_level names the hierarchy level), then
// per slide its slide, region and patch points.
// (px, py) = u_s[0:2] / (u_t + 1/sqrt(rho)).
std::string export_embeddings(const std::vector<const data::FeatureBag*>& bags, const model::ModelParams& params,
                              const std::vector<std::string>& class_names, const lorentz::GeometryConfig& geo);

std::array<double, 2> poincare_2d(const lorentz::HyperbolicPoint& p);

}  // namespace hypmil::evaluation
