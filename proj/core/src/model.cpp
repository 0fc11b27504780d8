#include "hypmil/model.hpp"

#include <cmath>
#include <random>

#include "hypmil/error.hpp"

namespace hypmil::model {

using ad::Tensor;
using ad::Var;

std::string_view to_string(HierarchyLevel level) {
  switch (level) {
    case HierarchyLevel::kPatch: return "patch";
    case HierarchyLevel::kRegion: return "region";
    case HierarchyLevel::kSlide: return "slide";
  }
  return "?";
}

std::optional<HierarchyLevel> subordinate(HierarchyLevel level) {
  switch (level) {
    case HierarchyLevel::kSlide: return HierarchyLevel::kRegion;
    case HierarchyLevel::kRegion: return HierarchyLevel::kPatch;
    case HierarchyLevel::kPatch: return std::nullopt;
  }
  return std::nullopt;
}

std::optional<HierarchyLevel> superordinate(HierarchyLevel level) {
  switch (level) {
    case HierarchyLevel::kPatch: return HierarchyLevel::kRegion;
    case HierarchyLevel::kRegion: return HierarchyLevel::kSlide;
    case HierarchyLevel::kSlide: return std::nullopt;
  }
  return std::nullopt;
}

void ModelDims::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || embed_dim < 2 || num_classes == 0) {
    throw Error(ErrorCode::kConfig, "model dimensions must be positive (embedding dim >= 2)");
  }
}

std::vector<ModelParams::NamedTensor> ModelParams::named_tensors() {
  std::vector<NamedTensor> out;
  auto add_mlp = [&](const std::string& p, Mlp& m) {
    out.push_back({p + ".w1", &m.w1});
    out.push_back({p + ".b1", &m.b1});
    out.push_back({p + ".w2", &m.w2});
    out.push_back({p + ".b2", &m.b2});
    out.push_back({p + ".log_scale", &m.log_scale});
  };
  add_mlp("adaptor_image", adaptor_image);
  add_mlp("adaptor_text", adaptor_text);
  out.push_back({"agg_patch_region.w1", &agg_patch_region.w1});
  out.push_back({"agg_patch_region.w2", &agg_patch_region.w2});
  if (!dims.shared_aggregator) {
    out.push_back({"agg_region_slide.w1", &agg_region_slide.w1});
    out.push_back({"agg_region_slide.w2", &agg_region_slide.w2});
  }
  out.push_back({"class_semantics.offsets", &class_semantics.offsets});
  out.push_back({"class_semantics.base", &class_semantics.base});
  return out;
}

std::vector<ModelParams::ConstNamedTensor> ModelParams::named_tensors() const {
  std::vector<ConstNamedTensor> out;
  for (auto& nt : const_cast<ModelParams*>(this)->named_tensors()) out.push_back({nt.name, nt.tensor});
  return out;
}

std::vector<ModelParams::NamedTensor> ModelParams::trainable() {
  auto all = named_tensors();
  all.pop_back();  // class_semantics.base is frozen
  return all;
}

std::vector<ModelParams::ConstNamedTensor> ModelParams::trainable() const {
  std::vector<ConstNamedTensor> out;
  for (auto& nt : const_cast<ModelParams*>(this)->trainable()) out.push_back({nt.name, nt.tensor});
  return out;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.dims.input_dim != b.dims.input_dim || a.dims.hidden_dim != b.dims.hidden_dim ||
      a.dims.embed_dim != b.dims.embed_dim || a.dims.num_classes != b.dims.num_classes ||
      a.dims.shared_aggregator != b.dims.shared_aggregator) {
    return false;
  }
  auto ta = a.named_tensors();
  auto tb = b.named_tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].name != tb[i].name || !(*ta[i].tensor == *tb[i].tensor)) return false;
  }
  return true;
}

namespace {

Tensor glorot(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-s, s);
  Tensor t(ad::Shape{rows, cols});
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

Mlp make_mlp(std::mt19937_64& rng, std::size_t in, std::size_t hidden, std::size_t out) {
  Mlp m;
  m.w1 = glorot(rng, hidden, in);
  m.b1 = Tensor(ad::Shape{hidden}, 0.0);
  m.w2 = glorot(rng, out, hidden);
  m.b2 = Tensor(ad::Shape{out}, 0.0);
  // Keeps initial embeddings off the origin, where exterior angles are undefined.
  m.b2[0] = 0.1;
  // Starts embeddings near the origin, where entailment cones are wide.
  m.log_scale = Tensor(ad::Shape{1}, -0.5 * std::log(static_cast<double>(out)));
  return m;
}

AttentionAggregator make_agg(std::mt19937_64& rng, std::size_t d, std::size_t a) {
  return {glorot(rng, a, d), glorot(rng, a, 1)};
}

constexpr double kOffsetInitScale = 0.1;

}  // namespace

ModelParams init_params(const ModelDims& dims, std::uint64_t seed, const Tensor& class_base) {
  dims.validate();
  if (class_base.rank() != 2 || class_base.dim(0) != dims.num_classes || class_base.dim(1) != dims.input_dim) {
    throw Error(ErrorCode::kShapeMismatch, "class base must be [classes x input_dim], got " +
                                               ad::shape_str(class_base.shape()));
  }
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.dims = dims;
  p.adaptor_image = make_mlp(rng, dims.input_dim, dims.hidden_dim, dims.embed_dim);
  p.adaptor_text = make_mlp(rng, dims.input_dim, dims.hidden_dim, dims.embed_dim);
  p.agg_patch_region = make_agg(rng, dims.embed_dim, dims.attention_dim());
  if (!dims.shared_aggregator) p.agg_region_slide = make_agg(rng, dims.embed_dim, dims.attention_dim());
  p.class_semantics.base = class_base;
  p.class_semantics.base.set_requires_grad(false);
  // Distinct per-level offsets keep a class's three text embeddings apart.
  std::uniform_real_distribution<double> off(-kOffsetInitScale, kOffsetInitScale);
  p.class_semantics.offsets = Tensor(ad::Shape{dims.num_classes, kNumLevels, dims.input_dim});
  for (auto& v : p.class_semantics.offsets.values()) v = off(rng);
  return p;
}

ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  std::seed_seq seq{seed, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> n01(0.0, 1.0);
  Tensor base(ad::Shape{dims.num_classes, dims.input_dim});
  for (std::size_t c = 0; c < dims.num_classes; ++c) {
    double ss = 0.0;
    for (std::size_t i = 0; i < dims.input_dim; ++i) {
      base.at(c, i) = n01(rng);
      ss += base.at(c, i) * base.at(c, i);
    }
    for (std::size_t i = 0; i < dims.input_dim; ++i) base.at(c, i) /= std::sqrt(ss);
  }
  return init_params(dims, seed, base);
}

Tensor class_base_tensor(const data::FeatureBundle& bundle) {
  Tensor t(ad::Shape{bundle.num_classes(), bundle.dim});
  for (std::size_t c = 0; c < bundle.num_classes(); ++c)
    for (std::size_t i = 0; i < bundle.dim; ++i) t.at(c, i) = bundle.class_semantics[c][i];
  return t;
}

Tensor bag_features(const data::FeatureBag& bag) {
  bag.validate();
  std::vector<double> v;
  v.reserve(bag.total_patches() * bag.dim);
  for (const auto& region : bag.regions) v.insert(v.end(), region.begin(), region.end());
  return Tensor(ad::Shape{bag.total_patches(), bag.dim}, std::move(v));
}

BoundParams bind_leaves(std::span<const Var> leaves, const ModelDims& dims) {
  const std::size_t expected = (dims.shared_aggregator ? 14 : 16);
  if (leaves.size() != expected) {
    throw Error(ErrorCode::kInvalidArgument, "bind_leaves: expected " + std::to_string(expected) + " leaves, got " +
                                                 std::to_string(leaves.size()));
  }
  BoundParams b;
  b.num_classes = dims.num_classes;
  std::size_t i = 0;
  auto next = [&] {
    Var v = leaves[i++];
    b.trainable.push_back(v);
    return v;
  };
  auto bind_mlp = [&] {
    BoundParams::BoundMlp m;
    m.w1 = next();
    m.b1 = next();
    m.w2 = next();
    m.b2 = next();
    m.log_scale = next();
    return m;
  };
  b.adaptor_image = bind_mlp();
  b.adaptor_text = bind_mlp();
  b.agg_patch_region.w1 = next();
  b.agg_patch_region.w2 = next();
  if (dims.shared_aggregator) {
    b.agg_region_slide = b.agg_patch_region;
  } else {
    b.agg_region_slide.w1 = next();
    b.agg_region_slide.w2 = next();
  }
  b.class_offsets = next();
  b.class_base = leaves[i];
  return b;
}

BoundParams bind(ad::Graph& g, const ModelParams& params) {
  std::vector<Var> leaves;
  const auto named = params.named_tensors();
  for (std::size_t i = 0; i < named.size(); ++i) {
    const bool frozen = i + 1 == named.size();
    leaves.push_back(frozen ? g.constant(*named[i].tensor) : g.parameter(*named[i].tensor));
  }
  return bind_leaves(leaves, params.dims);
}

std::vector<Tensor> collect_gradients(const ad::Graph& g, const BoundParams& bound) {
  std::vector<Tensor> out;
  out.reserve(bound.trainable.size());
  for (const auto& v : bound.trainable) out.push_back(g.grad(v));
  return out;
}

Var mlp_forward(Var x, const BoundParams::BoundMlp& mlp) {
  Var h = ad::tanh(ad::matmul(x, ad::transpose(mlp.w1)) + mlp.b1);
  return (ad::matmul(h, ad::transpose(mlp.w2)) + mlp.b2) * ad::exp(mlp.log_scale);
}

Var attention_weights(Var rows, const BoundParams::BoundAgg& agg) {
  Var logits = ad::matmul(ad::tanh(ad::matmul(rows, ad::transpose(agg.w1))), agg.w2);  // [N x 1]
  return ad::softmax(logits, 0);
}

Var aggregate(Var rows, const BoundParams::BoundAgg& agg) {
  return ad::matmul(ad::transpose(attention_weights(rows, agg)), rows);
}

Tensor attention_weights(const Tensor& rows, const AttentionAggregator& agg) {
  if (rows.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "aggregate expects [N x D] rows");
  ad::Graph g;
  BoundParams::BoundAgg b{g.constant(agg.w1), g.constant(agg.w2)};
  return attention_weights(g.constant(rows), b).value();
}

Tensor aggregate(const Tensor& rows, const AttentionAggregator& agg) {
  if (rows.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "aggregate expects [N x D] rows");
  ad::Graph g;
  BoundParams::BoundAgg b{g.constant(agg.w1), g.constant(agg.w2)};
  return aggregate(g.constant(rows), b).value();
}

Var GraphEmbeddings::image(HierarchyLevel level) const {
  switch (level) {
    case HierarchyLevel::kPatch: return patch;
    case HierarchyLevel::kRegion: return region;
    case HierarchyLevel::kSlide: return slide;
  }
  return slide;
}

GraphEmbeddings embed_slide(ad::Graph& g, const BoundParams& bound, const data::FeatureBag& bag,
                            const lorentz::GeometryConfig& geometry, bool shared_aggregator) {
  Var raw = g.constant(bag_features(bag));
  if (raw.shape()[1] != bound.class_base.shape()[1]) {
    throw Error(ErrorCode::kShapeMismatch, "bag feature dim " + std::to_string(raw.shape()[1]) +
                                               " does not match model input dim " +
                                               std::to_string(bound.class_base.shape()[1]));
  }
  GraphEmbeddings e;
  e.num_classes = bound.num_classes;
  e.patch_tangent = mlp_forward(raw, bound.adaptor_image);

  const auto& region_agg = bound.agg_patch_region;
  const auto& slide_agg = shared_aggregator ? bound.agg_patch_region : bound.agg_region_slide;
  std::vector<Var> regions;
  std::size_t begin = 0;
  for (std::size_t r = 0; r < bag.num_regions(); ++r) {
    const std::size_t n = bag.patches_in(r);
    regions.push_back(aggregate(ad::slice_rows(e.patch_tangent, begin, begin + n), region_agg));
    e.patch_region.insert(e.patch_region.end(), n, r);
    begin += n;
  }
  e.region_tangent = regions.size() == 1 ? regions.front() : ad::concat(regions, 0);
  e.slide_tangent = aggregate(e.region_tangent, slide_agg);

  e.patch = lorentz::exp_map_origin(e.patch_tangent, geometry);
  e.region = lorentz::exp_map_origin(e.region_tangent, geometry);
  e.slide = lorentz::exp_map_origin(e.slide_tangent, geometry);

  const std::size_t nc = bound.num_classes;
  const std::size_t din = bound.class_base.shape()[1];
  Var base = ad::reshape(bound.class_base, ad::Shape{nc, 1, din});
  Var text_raw = ad::reshape(base + bound.class_offsets, ad::Shape{nc * kNumLevels, din});
  e.text_tangent = mlp_forward(text_raw, bound.adaptor_text);
  e.text = lorentz::exp_map_origin(e.text_tangent, geometry);
  return e;
}

std::vector<lorentz::HyperbolicPoint> to_points(const Tensor& space_rows, double curvature) {
  std::vector<lorentz::HyperbolicPoint> out;
  const std::size_t n = space_rows.dim(0), k = space_rows.dim(1);
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = space_rows.values().subspan(i * k, k);
    out.emplace_back(std::vector<double>(row.begin(), row.end()), curvature);
  }
  return out;
}

EmbeddingSet embed_slide(const data::FeatureBag& bag, const ModelParams& params,
                         const lorentz::GeometryConfig& geometry) {
  ad::Graph g;
  auto bound = bind(g, params);
  auto e = embed_slide(g, bound, bag, geometry, params.dims.shared_aggregator);
  EmbeddingSet out;
  out.patches = to_points(e.patch.value(), geometry.curvature);
  out.regions = to_points(e.region.value(), geometry.curvature);
  out.slide = to_points(e.slide.value(), geometry.curvature);
  out.text = to_points(e.text.value(), geometry.curvature);
  out.patch_region = e.patch_region;
  out.patch_tangent = e.patch_tangent.value();
  out.region_tangent = e.region_tangent.value();
  out.slide_tangent = e.slide_tangent.value();
  return out;
}

}  // namespace hypmil::model
