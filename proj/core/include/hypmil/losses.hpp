#pragma once

// Alignment (angular), hierarchy-consistency (entailment cones) and
// geodesic classification losses, plus their assembly into the objective
//   L = L_cls + lambda_a * L_ama + lambda_s * L_shc.

#include <cstddef>
#include <span>
#include <vector>

#include "hypmil/autodiff.hpp"
#include "hypmil/config.hpp"
#include "hypmil/lorentz.hpp"
#include "hypmil/model.hpp"

namespace hypmil::losses {

using lorentz::GeometryConfig;
using lorentz::HyperbolicPoint;

// --- closed-form kernels ---------------------------------------------------

// -log( e^{s+/tau} / (e^{s+/tau} + sum_j e^{|s-_j|/tau}) ), averaged over
// rows. `positive` and every negative are broadcast-compatible [N x 1].
ad::Var ama_from_similarities(ad::Var positive, std::span<const ad::Var> negatives, double tau);
double ama_from_similarities(double positive, std::span<const double> negatives, double tau);

// exp(theta/ap - 1) * max(theta - beta*ap, 0), elementwise.
ad::Var entailment_penalty(ad::Var theta, ad::Var aperture, double beta);
double entailment_penalty(double theta, double aperture, double beta);

// exp(ap/theta - 1) * max(ap - beta*theta, 0) with theta floored at
// `theta_floor`, elementwise.
ad::Var contradiction_penalty(ad::Var theta, ad::Var aperture, double beta, double theta_floor);
double contradiction_penalty(double theta, double aperture, double beta, double theta_floor);

// -log softmax(-d)[label] for a column of class distances.
ad::Var cls_from_distances(ad::Var distances, std::size_t label);
double cls_from_distances(std::span<const double> distances, std::size_t label);

// --- geometric losses --------------------------------------------------------

// phi(ref_pos, ref_neg) - phi(u, v).
double semantic_similarity(const HyperbolicPoint& u, const HyperbolicPoint& v, const HyperbolicPoint& ref_pos,
                           const HyperbolicPoint& ref_neg, const GeometryConfig& geo);

struct AlignmentBatch {
  HyperbolicPoint query;
  HyperbolicPoint positive;
  std::vector<HyperbolicPoint> negatives;
};

// With several negatives, negative j's similarity uses the reference
// phi(v+, v-_j) and the positive's uses the mean of those references; with
// one negative both reduce to phi(v+, v-).
ad::Var ama_loss(ad::Var query, ad::Var positive, std::span<const ad::Var> negatives, const GeometryConfig& geo,
                 const LossConfig& cfg);
double ama_loss(const AlignmentBatch& batch, const GeometryConfig& geo, const LossConfig& cfg);

// Mean over broadcast row pairs (u superordinate, v subordinate).
ad::Var ent_loss(ad::Var u, ad::Var v, const GeometryConfig& geo, const LossConfig& cfg);
double ent_loss(const HyperbolicPoint& u, const HyperbolicPoint& v, const GeometryConfig& geo, const LossConfig& cfg);
ad::Var con_loss(ad::Var u, ad::Var v, const GeometryConfig& geo, const LossConfig& cfg);
double con_loss(const HyperbolicPoint& u, const HyperbolicPoint& v, const GeometryConfig& geo, const LossConfig& cfg);

// Slide point [1 x k] against per-class slide-level text points [C x k].
ad::Var cls_loss(ad::Var slide, ad::Var text_slide, std::size_t label, const GeometryConfig& geo);

// --- objective assembly -----------------------------------------------------

// Indices into the patch rows (global over the bag) and region rows that
// stand in for instance labels at the two unlabeled levels.
struct Selection {
  std::vector<std::size_t> patches;
  std::vector<std::size_t> regions;

  const std::vector<std::size_t>* at(model::HierarchyLevel level) const;
};

// Per level: the image-query term averaged over the selected image points
// (positive: label-class text; negatives: other-class text at the level),
// plus the text-query term (query: label-class text; positive: each selected
// image point; negatives: other-class text). Levels with nothing selected
// contribute zero and are counted in `empty_levels` when non-null.
ad::Var ama_total(const model::GraphEmbeddings& e, std::size_t label, const Selection& sel, const GeometryConfig& geo,
                  const LossConfig& cfg, std::size_t* empty_levels = nullptr);

struct ShcParts {
  ad::Var ent;
  ad::Var con;
  ad::Var total;
};

// Entailment: slide -> each region, region -> own patches, class text
// level -> finer text level (every class), label-class text -> selected
// image points per level. Contradiction: every other-class text -> the same
// selected image points. Each term is a mean over its pairs.
ShcParts shc_total(const model::GraphEmbeddings& e, std::size_t label, const Selection& sel,
                   const GeometryConfig& geo, const LossConfig& cfg);

struct LossBreakdown {
  ad::Var total;
  ad::Var cls;
  // Invalid when the corresponding weight is zero (the term is not built).
  ad::Var ama;
  ad::Var shc;
  std::size_t empty_levels = 0;
};

LossBreakdown total_loss(const model::GraphEmbeddings& e, std::size_t label, const Selection& sel,
                         const GeometryConfig& geo, const LossConfig& cfg);

}  // namespace hypmil::losses
