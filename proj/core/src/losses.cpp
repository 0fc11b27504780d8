#include "hypmil/losses.hpp"

#include <algorithm>
#include <cmath>

#include "hypmil/error.hpp"

namespace hypmil::losses {

using ad::Var;
using model::GraphEmbeddings;
using model::HierarchyLevel;

namespace {

Var zeros_like_scalar(ad::Graph& g) { return g.constant(ad::Tensor::scalar(0.0)); }

Var point_rows(ad::Graph& g, std::span<const HyperbolicPoint> pts) {
  const std::size_t k = pts.front().dim();
  std::vector<double> v;
  v.reserve(pts.size() * k);
  for (const auto& p : pts) v.insert(v.end(), p.space().begin(), p.space().end());
  return g.constant(ad::Tensor(ad::Shape{pts.size(), k}, std::move(v)));
}

Var point_row(ad::Graph& g, const HyperbolicPoint& p) { return point_rows(g, std::span(&p, 1)); }

std::size_t rows_of(Var v) { return v.shape().empty() ? 1 : v.shape()[0]; }

}  // namespace

Var ama_from_similarities(Var positive, std::span<const Var> negatives, double tau) {
  if (negatives.empty()) throw Error(ErrorCode::kInvalidArgument, "alignment loss needs at least one negative");
  std::size_t n = rows_of(positive);
  for (const auto& neg : negatives) n = std::max(n, rows_of(neg));
  const ad::Shape col{n, 1};
  std::vector<Var> logits;
  Var pos = ad::broadcast_to(ad::reshape(positive, {rows_of(positive), 1}), col) / tau;
  logits.push_back(pos);
  for (const auto& neg : negatives) {
    logits.push_back(ad::broadcast_to(ad::reshape(ad::abs(neg), {rows_of(neg), 1}), col) / tau);
  }
  Var all = ad::concat(logits, 1);
  return ad::mean(ad::logsumexp(all, 1) - pos);
}

double ama_from_similarities(double positive, std::span<const double> negatives, double tau) {
  if (negatives.empty()) throw Error(ErrorCode::kInvalidArgument, "alignment loss needs at least one negative");
  const double lp = positive / tau;
  double m = lp;
  for (double s : negatives) m = std::max(m, std::fabs(s) / tau);
  double acc = std::exp(lp - m);
  for (double s : negatives) acc += std::exp(std::fabs(s) / tau - m);
  return m + std::log(acc) - lp;
}

Var entailment_penalty(Var theta, Var aperture, double beta) {
  Var margin = ad::maximum(theta - beta * aperture, theta.graph().constant(ad::Tensor::scalar(0.0)));
  return ad::exp(theta / aperture - 1.0) * margin;
}

double entailment_penalty(double theta, double aperture, double beta) {
  return std::exp(theta / aperture - 1.0) * std::max(theta - beta * aperture, 0.0);
}

Var contradiction_penalty(Var theta, Var aperture, double beta, double theta_floor) {
  Var t = ad::clamp_min(theta, theta_floor);
  Var margin = ad::maximum(aperture - beta * t, theta.graph().constant(ad::Tensor::scalar(0.0)));
  return ad::exp(aperture / t - 1.0) * margin;
}

double contradiction_penalty(double theta, double aperture, double beta, double theta_floor) {
  const double t = std::max(theta, theta_floor);
  return std::exp(aperture / t - 1.0) * std::max(aperture - beta * t, 0.0);
}

Var cls_from_distances(Var distances, std::size_t label) {
  const std::size_t n = distances.size();
  if (label >= n) throw Error(ErrorCode::kInvalidArgument, "label out of range for classification loss");
  Var logits = -ad::reshape(distances, {n, 1});
  const std::size_t idx[] = {label};
  return ad::reshape(ad::logsumexp(logits, 0) - ad::rows(logits, idx), ad::Shape{});
}

double cls_from_distances(std::span<const double> distances, std::size_t label) {
  if (label >= distances.size()) throw Error(ErrorCode::kInvalidArgument, "label out of range for classification loss");
  double m = -distances[0];
  for (double d : distances) m = std::max(m, -d);
  double acc = 0.0;
  for (double d : distances) acc += std::exp(-d - m);
  return m + std::log(acc) + distances[label];
}

double semantic_similarity(const HyperbolicPoint& u, const HyperbolicPoint& v, const HyperbolicPoint& ref_pos,
                           const HyperbolicPoint& ref_neg, const GeometryConfig& geo) {
  return lorentz::angle_distance(ref_pos, ref_neg, geo) - lorentz::angle_distance(u, v, geo);
}

Var ama_loss(Var query, Var positive, std::span<const Var> negatives, const GeometryConfig& geo,
             const LossConfig& cfg) {
  if (negatives.empty()) throw Error(ErrorCode::kInvalidArgument, "alignment loss needs at least one negative");
  std::vector<Var> refs;
  for (const auto& neg : negatives) refs.push_back(lorentz::angle_distance(positive, neg, geo));
  Var ref_pos = refs.front();
  for (std::size_t j = 1; j < refs.size(); ++j) ref_pos = ref_pos + refs[j];
  if (refs.size() > 1) ref_pos = ref_pos / static_cast<double>(refs.size());

  Var sim_pos = ref_pos - lorentz::angle_distance(query, positive, geo);
  std::vector<Var> sim_neg;
  for (std::size_t j = 0; j < negatives.size(); ++j) {
    sim_neg.push_back(refs[j] - lorentz::angle_distance(query, negatives[j], geo));
  }
  return ama_from_similarities(sim_pos, sim_neg, cfg.tau);
}

double ama_loss(const AlignmentBatch& batch, const GeometryConfig& geo, const LossConfig& cfg) {
  ad::Graph g;
  std::vector<Var> negs;
  for (const auto& n : batch.negatives) negs.push_back(point_row(g, n));
  return ama_loss(point_row(g, batch.query), point_row(g, batch.positive), negs, geo, cfg).item();
}

Var ent_loss(Var u, Var v, const GeometryConfig& geo, const LossConfig& cfg) {
  Var theta = lorentz::exterior_angle(u, v, geo);
  Var ap = lorentz::half_aperture(u, geo, cfg.alpha);
  return ad::mean(entailment_penalty(theta, ap, cfg.beta_ent));
}

double ent_loss(const HyperbolicPoint& u, const HyperbolicPoint& v, const GeometryConfig& geo,
                const LossConfig& cfg) {
  return entailment_penalty(lorentz::exterior_angle(u, v, geo), lorentz::half_aperture(u, geo, cfg.alpha),
                            cfg.beta_ent);
}

Var con_loss(Var u, Var v, const GeometryConfig& geo, const LossConfig& cfg) {
  Var theta = lorentz::exterior_angle(u, v, geo);
  Var ap = lorentz::half_aperture(u, geo, cfg.alpha);
  return ad::mean(contradiction_penalty(theta, ap, cfg.beta_con, cfg.theta_floor));
}

double con_loss(const HyperbolicPoint& u, const HyperbolicPoint& v, const GeometryConfig& geo,
                const LossConfig& cfg) {
  return contradiction_penalty(lorentz::exterior_angle(u, v, geo), lorentz::half_aperture(u, geo, cfg.alpha),
                               cfg.beta_con, cfg.theta_floor);
}

Var cls_loss(Var slide, Var text_slide, std::size_t label, const GeometryConfig& geo) {
  if (text_slide.shape()[0] < 2) throw Error(ErrorCode::kInvalidArgument, "classification needs at least two classes");
  return cls_from_distances(lorentz::geodesic(slide, text_slide, geo), label);
}

// ---------------------------------------------------------------------------

const std::vector<std::size_t>* Selection::at(HierarchyLevel level) const {
  switch (level) {
    case HierarchyLevel::kPatch: return &patches;
    case HierarchyLevel::kRegion: return &regions;
    case HierarchyLevel::kSlide: return nullptr;
  }
  return nullptr;
}

namespace {

// Selected image points at a level ([1 x k] for the slide); invalid Var when
// nothing is selected.
Var selected_image(const GraphEmbeddings& e, const Selection& sel, HierarchyLevel level) {
  const auto* idx = sel.at(level);
  if (!idx) return e.slide;
  if (idx->empty()) return Var();
  return ad::rows(e.image(level), *idx);
}

Var text_point(const GraphEmbeddings& e, std::size_t cls, HierarchyLevel level) {
  const std::size_t idx[] = {GraphEmbeddings::text_row(cls, level)};
  return ad::rows(e.text, idx);
}

Var sum_all(ad::Graph& g, const std::vector<Var>& terms) {
  if (terms.empty()) return zeros_like_scalar(g);
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = acc + terms[i];
  return acc;
}

}  // namespace

Var ama_total(const GraphEmbeddings& e, std::size_t label, const Selection& sel, const GeometryConfig& geo,
              const LossConfig& cfg, std::size_t* empty_levels) {
  if (e.num_classes < 2) throw Error(ErrorCode::kInvalidArgument, "alignment loss needs at least two classes");
  ad::Graph& g = e.text.graph();
  std::vector<Var> terms;
  for (auto level : model::kLevels) {
    Var image = selected_image(e, sel, level);
    if (!image.valid()) {
      if (empty_levels) ++*empty_levels;
      continue;
    }
    Var text_pos = text_point(e, label, level);
    std::vector<Var> text_neg;
    for (std::size_t c = 0; c < e.num_classes; ++c) {
      if (c != label) text_neg.push_back(text_point(e, c, level));
    }
    terms.push_back(ama_loss(image, text_pos, text_neg, geo, cfg));
    terms.push_back(ama_loss(text_pos, image, text_neg, geo, cfg));
  }
  return ad::reshape(sum_all(g, terms), ad::Shape{});
}

ShcParts shc_total(const GraphEmbeddings& e, std::size_t label, const Selection& sel, const GeometryConfig& geo,
                   const LossConfig& cfg) {
  ad::Graph& g = e.text.graph();
  std::vector<Var> ent, con;

  // Image hierarchy.
  ent.push_back(ent_loss(e.slide, e.region, geo, cfg));
  ent.push_back(ent_loss(ad::rows(e.region, e.patch_region), e.patch, geo, cfg));

  // Text hierarchy, per class.
  for (auto level : {HierarchyLevel::kSlide, HierarchyLevel::kRegion}) {
    const auto finer = *model::subordinate(level);
    std::vector<std::size_t> up, down;
    for (std::size_t c = 0; c < e.num_classes; ++c) {
      up.push_back(GraphEmbeddings::text_row(c, level));
      down.push_back(GraphEmbeddings::text_row(c, finer));
    }
    ent.push_back(ent_loss(ad::rows(e.text, up), ad::rows(e.text, down), geo, cfg));
  }

  // Cross-modal: label-class text entails, other-class text contradicts.
  for (auto level : model::kLevels) {
    Var image = selected_image(e, sel, level);
    if (!image.valid()) continue;
    ent.push_back(ent_loss(text_point(e, label, level), image, geo, cfg));

    const std::size_t n = image.shape()[0];
    std::vector<std::size_t> text_idx, image_idx;
    for (std::size_t c = 0; c < e.num_classes; ++c) {
      if (c == label) continue;
      for (std::size_t i = 0; i < n; ++i) {
        text_idx.push_back(GraphEmbeddings::text_row(c, level));
        image_idx.push_back(i);
      }
    }
    if (!text_idx.empty()) con.push_back(con_loss(ad::rows(e.text, text_idx), ad::rows(image, image_idx), geo, cfg));
  }

  ShcParts out;
  out.ent = ad::reshape(sum_all(g, ent), ad::Shape{});
  out.con = ad::reshape(sum_all(g, con), ad::Shape{});
  out.total = out.ent + out.con;
  return out;
}

LossBreakdown total_loss(const GraphEmbeddings& e, std::size_t label, const Selection& sel,
                         const GeometryConfig& geo, const LossConfig& cfg) {
  LossBreakdown out;
  const std::size_t idx_begin = model::GraphEmbeddings::text_row(0, HierarchyLevel::kSlide);
  std::vector<std::size_t> slide_rows;
  for (std::size_t c = 0; c < e.num_classes; ++c) slide_rows.push_back(idx_begin + c * model::kNumLevels);
  out.cls = cls_loss(e.slide, ad::rows(e.text, slide_rows), label, geo);
  out.total = out.cls;
  if (cfg.lambda_a != 0.0) {
    out.ama = ama_total(e, label, sel, geo, cfg, &out.empty_levels);
    out.total = out.total + cfg.lambda_a * out.ama;
  }
  if (cfg.lambda_s != 0.0) {
    out.shc = shc_total(e, label, sel, geo, cfg).total;
    out.total = out.total + cfg.lambda_s * out.shc;
  }
  return out;
}

}  // namespace hypmil::losses
