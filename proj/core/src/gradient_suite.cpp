#include <algorithm>
#include <cmath>
#include <random>

#include "hypmil/error.hpp"
#include "hypmil/gradcheck.hpp"
#include "hypmil/training.hpp"

namespace hypmil::training {

using ad::Graph;
using ad::Tensor;
using ad::Var;

namespace {

constexpr std::size_t kDin = 8, kEmbed = 4, kClasses = 2, kRegions = 2, kPatches = 3;
// Spread of random space components; matches the radii training works at,
// where the exp-scaled cone penalties stay within a few orders of magnitude
// and central differences keep their precision.
constexpr double kPointSigma = 0.2;
// Raw feature and class-base norm of the tiny bags; puts the tiny model's
// embeddings at those radii too.
constexpr float kFeatureScale = 0.4f;
// Inputs this close to a kink (asin/acos clamp, hinge, |similarity|) are
// redrawn: central differences straddling one do not estimate the gradient.
constexpr double kClampMargin = 1e-2;
constexpr double kKinkMargin = 1e-3;
constexpr int kMaxRedraws = 100;

bool near_clamp(double space_norm, const lorentz::GeometryConfig& geo, double alpha) {
  return std::fabs(2.0 * alpha / (std::sqrt(geo.curvature) * space_norm) - 1.0) < kClampMargin;
}

bool rows_near_clamp(const Tensor& t, const lorentz::GeometryConfig& geo, double alpha) {
  for (std::size_t r = 0; r < t.dim(0); ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < t.dim(1); ++c) ss += t.at(r, c) * t.at(r, c);
    if (near_clamp(std::sqrt(ss), geo, alpha)) return true;
  }
  return false;
}

// Mirrors the pairs the full objective visits on the tiny model.
class KinkScan {
 public:
  KinkScan(const lorentz::GeometryConfig& geo, const LossConfig& cfg) : geo_(geo), cfg_(cfg) {}

  bool near = false;

  void point(const lorentz::HyperbolicPoint& u) { near = near || near_clamp(u.space_norm(), geo_, cfg_.alpha); }

  void angle(double theta) { near = near || std::fabs(std::cos(theta)) > 1.0 - kClampMargin; }

  void entail(const lorentz::HyperbolicPoint& u, const lorentz::HyperbolicPoint& v) {
    const double theta = lorentz::exterior_angle(u, v, geo_);
    angle(theta);
    near = near || std::fabs(theta - cfg_.beta_ent * lorentz::half_aperture(u, geo_, cfg_.alpha)) < kKinkMargin;
  }

  void contradict(const lorentz::HyperbolicPoint& u, const lorentz::HyperbolicPoint& v) {
    const double theta = lorentz::exterior_angle(u, v, geo_);
    angle(theta);
    const double floored = std::max(theta, cfg_.theta_floor);
    near = near || std::fabs(theta - cfg_.theta_floor) < kKinkMargin ||
           std::fabs(lorentz::half_aperture(u, geo_, cfg_.alpha) - cfg_.beta_con * floored) < kKinkMargin;
  }

  // One negative: the negative's similarity is phi(pos, neg) - phi(query, neg).
  void align(const lorentz::HyperbolicPoint& query, const lorentz::HyperbolicPoint& pos,
             const lorentz::HyperbolicPoint& neg) {
    for (const auto* a : {&query, &pos}) {
      angle(lorentz::exterior_angle(*a, neg, geo_));
      angle(lorentz::exterior_angle(neg, *a, geo_));
    }
    angle(lorentz::exterior_angle(query, pos, geo_));
    angle(lorentz::exterior_angle(pos, query, geo_));
    near = near || std::fabs(lorentz::angle_distance(pos, neg, geo_) - lorentz::angle_distance(query, neg, geo_)) <
                       kKinkMargin;
  }

 private:
  lorentz::GeometryConfig geo_;
  LossConfig cfg_;
};

bool objective_near_kink(const model::EmbeddingSet& e, std::size_t label, const losses::Selection& sel,
                         const lorentz::GeometryConfig& geo, const LossConfig& cfg) {
  using model::HierarchyLevel;
  KinkScan scan(geo, cfg);
  for (const auto* set : {&e.patches, &e.regions, &e.slide, &e.text}) {
    for (const auto& p : *set) scan.point(p);
  }
  for (const auto& r : e.regions) scan.entail(e.slide.front(), r);
  for (std::size_t p = 0; p < e.patches.size(); ++p) scan.entail(e.regions[e.patch_region[p]], e.patches[p]);
  for (std::size_t c = 0; c < kClasses; ++c) {
    scan.entail(e.text_at(c, HierarchyLevel::kSlide), e.text_at(c, HierarchyLevel::kRegion));
    scan.entail(e.text_at(c, HierarchyLevel::kRegion), e.text_at(c, HierarchyLevel::kPatch));
  }
  const std::size_t other = 1 - label;
  for (auto level : model::kLevels) {
    std::vector<const lorentz::HyperbolicPoint*> image;
    if (const auto* idx = sel.at(level)) {
      const auto& pool = level == HierarchyLevel::kPatch ? e.patches : e.regions;
      for (std::size_t i : *idx) image.push_back(&pool[i]);
    } else {
      image.push_back(&e.slide.front());
    }
    const auto& pos = e.text_at(label, level);
    const auto& neg = e.text_at(other, level);
    for (const auto* v : image) {
      scan.entail(pos, *v);
      scan.contradict(neg, *v);
      scan.align(*v, pos, neg);
      scan.align(pos, *v, neg);
    }
  }
  return scan.near;
}

Tensor random_tensor(std::mt19937_64& rng, ad::Shape shape, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = n(rng);
  t.set_requires_grad(true);
  return t;
}

data::FeatureBundle tiny_bundle(std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  data::FeatureBundle b;
  b.dim = kDin;
  b.class_names = {"a", "b"};
  for (std::size_t c = 0; c < kClasses; ++c) {
    std::vector<float> base(kDin);
    float ss = 0.0f;
    for (float& v : base) {
      v = n(rng);
      ss += v * v;
    }
    for (float& v : base) v *= kFeatureScale / std::sqrt(ss);
    b.class_semantics.push_back(base);
  }
  data::FeatureBag bag;
  bag.slide_id = "tiny";
  bag.label = std::uniform_int_distribution<std::size_t>(0, kClasses - 1)(rng);
  bag.site = "s";
  bag.dim = kDin;
  for (std::size_t r = 0; r < kRegions; ++r) {
    std::vector<float> rows(kPatches * kDin);
    for (float& v : rows) v = kFeatureScale * n(rng) / std::sqrt(static_cast<float>(kDin));
    bag.regions.push_back(rows);
  }
  b.bags.push_back(bag);
  return b;
}

}  // namespace

std::vector<GradSuiteEntry> gradient_suite(std::size_t trials, std::uint64_t seed) {
  std::vector<GradSuiteEntry> out;
  for (const char* name : {"ama_loss", "ent_loss", "con_loss", "cls_loss", "aggregate", "total_loss"}) {
    out.push_back({name, 0.0, 0, 0});
  }
  lorentz::GeometryConfig geo;
  geo.dim = kEmbed;
  LossConfig loss;

  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial)};
    std::mt19937_64 rng(seq);
    geo.curvature = std::uniform_real_distribution<double>(0.5, 2.0)(rng);

    auto points = [&](ad::Shape shape) {
      Tensor t = random_tensor(rng, shape, kPointSigma);
      for (int i = 0; i < kMaxRedraws && rows_near_clamp(t, geo, loss.alpha); ++i) t = random_tensor(rng, shape, kPointSigma);
      return t;
    };

    std::vector<std::pair<ad::ScalarFn, std::vector<Tensor>>> cases;
    cases.push_back({[&](Graph&, std::span<const Var> x) {
                       const Var neg[] = {x[2]};
                       return losses::ama_loss(x[0], x[1], neg, geo, loss);
                     },
                     {points({3, kEmbed}), points({1, kEmbed}),
                      points({1, kEmbed})}});
    cases.push_back({[&](Graph&, std::span<const Var> x) { return losses::ent_loss(x[0], x[1], geo, loss); },
                     {points({4, kEmbed}), points({4, kEmbed})}});
    cases.push_back({[&](Graph&, std::span<const Var> x) { return losses::con_loss(x[0], x[1], geo, loss); },
                     {points({4, kEmbed}), points({4, kEmbed})}});
    const std::size_t label = std::uniform_int_distribution<std::size_t>(0, kClasses - 1)(rng);
    cases.push_back({[&, label](Graph&, std::span<const Var> x) { return losses::cls_loss(x[0], x[1], label, geo); },
                     {points({1, kEmbed}), points({kClasses, kEmbed})}});
    Tensor probe = random_tensor(rng, {1, kEmbed}, 1.0);
    probe.set_requires_grad(false);
    cases.push_back({[&, probe](Graph& g, std::span<const Var> x) {
                       model::BoundParams::BoundAgg agg{x[1], x[2]};
                       return ad::sum(model::aggregate(x[0], agg) * g.constant(probe));
                     },
                     {random_tensor(rng, {kPatches + 2, kEmbed}, 1.0), random_tensor(rng, {1, kEmbed}, 0.8),
                      random_tensor(rng, {1, 1}, 0.8)}});

    const auto bundle = tiny_bundle(rng);
    TrainConfig cfg;
    cfg.embed_dim = kEmbed;
    cfg.curvature = geo.curvature;
    cfg.loss.top_k = 2;
    cfg.seed = rng();
    auto params = initial_params(bundle, cfg);
    const auto& bag = bundle.bags.front();
    const auto sel = select_top_k(bag, params.class_semantics.base, bag.label, cfg.loss.top_k);
    for (int i = 0; i < kMaxRedraws && objective_near_kink(model::embed_slide(bag, params, geo), bag.label, sel, geo,
                                                           cfg.loss);
         ++i) {
      cfg.seed = rng();
      params = initial_params(bundle, cfg);
    }
    std::vector<Tensor> leaves;
    for (const auto& nt : params.named_tensors()) leaves.push_back(*nt.tensor);
    for (std::size_t i = 0; i + 1 < leaves.size(); ++i) leaves[i].set_requires_grad(true);
    leaves.back().set_requires_grad(false);
    const auto dims = params.dims;
    cases.push_back({[&, sel, dims](Graph& g, std::span<const Var> x) {
                       auto bound = model::bind_leaves(x, dims);
                       auto e = model::embed_slide(g, bound, bag, geo, dims.shared_aggregator);
                       return losses::total_loss(e, bag.label, sel, geo, cfg.loss).total;
                     },
                     leaves});

    for (std::size_t k = 0; k < cases.size(); ++k) {
      auto& entry = out[k];
      ++entry.trials;
      try {
        entry.max_rel_error = std::max(entry.max_rel_error, ad::finite_difference_check(cases[k].first, cases[k].second));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNonFinite) throw;
        ++entry.nan_trials;
      }
    }
  }
  return out;
}

}  // namespace hypmil::training
