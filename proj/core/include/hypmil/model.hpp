#pragma once

// Trainable components and the hierarchical forward pass:
//   raw patch features -> image adaptor -> tangent patch features
//   -> gated-attention pooling to regions -> pooling to the slide
//   -> exp map at the origin for every level;
//   class base vector + per-level offset -> text adaptor -> exp map.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hypmil/autodiff.hpp"
#include "hypmil/data.hpp"
#include "hypmil/lorentz.hpp"

namespace hypmil::model {

enum class HierarchyLevel : std::size_t { kPatch = 0, kRegion = 1, kSlide = 2 };
inline constexpr std::size_t kNumLevels = 3;
inline constexpr std::array<HierarchyLevel, kNumLevels> kLevels = {HierarchyLevel::kPatch, HierarchyLevel::kRegion,
                                                                  HierarchyLevel::kSlide};

std::string_view to_string(HierarchyLevel level);
// The level one step finer (Slide -> Region -> Patch); none for Patch.
std::optional<HierarchyLevel> subordinate(HierarchyLevel level);
std::optional<HierarchyLevel> superordinate(HierarchyLevel level);

// Two-layer perceptron with a tanh between the layers, its output scaled
// by exp(log_scale).
struct Mlp {
  ad::Tensor w1;         // [hidden x in]
  ad::Tensor b1;         // [hidden]
  ad::Tensor w2;         // [out x hidden]
  ad::Tensor b2;         // [out]
  ad::Tensor log_scale;  // [1]
};

struct AttentionAggregator {
  ad::Tensor w1;  // [D/4 x D]
  ad::Tensor w2;  // [D/4 x 1]
};

struct ClassSemanticsTable {
  ad::Tensor base;     // [classes x in], frozen
  ad::Tensor offsets;  // [classes x 3 x in], one offset per hierarchy level
};

struct ModelDims {
  std::size_t input_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t embed_dim = 16;
  std::size_t num_classes = 2;
  bool shared_aggregator = false;

  std::size_t attention_dim() const { return embed_dim >= 4 ? embed_dim / 4 : 1; }
  void validate() const;
};

struct ModelParams {
  ModelDims dims;
  Mlp adaptor_image;
  Mlp adaptor_text;
  AttentionAggregator agg_patch_region;
  // Unused (left empty) when dims.shared_aggregator is set.
  AttentionAggregator agg_region_slide;
  ClassSemanticsTable class_semantics;

  const AttentionAggregator& region_slide_aggregator() const {
    return dims.shared_aggregator ? agg_patch_region : agg_region_slide;
  }

  struct NamedTensor {
    std::string name;
    ad::Tensor* tensor;
  };
  struct ConstNamedTensor {
    std::string name;
    const ad::Tensor* tensor;
  };
  // Every stored tensor in a fixed order (used by checkpoints).
  std::vector<NamedTensor> named_tensors();
  std::vector<ConstNamedTensor> named_tensors() const;
  // The tensors the optimizer updates; excludes the frozen class base.
  std::vector<NamedTensor> trainable();
  std::vector<ConstNamedTensor> trainable() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b);
};

// Uniform Glorot init, adaptor output bias 0.1 in coordinate 0, adaptor
// output scale 1/sqrt(k), random unit-norm class base vectors.
// Deterministic in `seed`.
ModelParams init_params(const ModelDims& dims, std::uint64_t seed);
// As above with the frozen class base vectors supplied ([classes x in]).
ModelParams init_params(const ModelDims& dims, std::uint64_t seed, const ad::Tensor& class_base);

ad::Tensor class_base_tensor(const data::FeatureBundle& bundle);
ad::Tensor bag_features(const data::FeatureBag& bag);

// Graph leaves for one forward pass. Trainable tensors become parameters
// in ModelParams::trainable() order.
struct BoundParams {
  struct BoundMlp {
    ad::Var w1, b1, w2, b2, log_scale;
  };
  struct BoundAgg {
    ad::Var w1, w2;
  };
  BoundMlp adaptor_image, adaptor_text;
  BoundAgg agg_patch_region, agg_region_slide;
  ad::Var class_base, class_offsets;
  std::vector<ad::Var> trainable;
  std::size_t num_classes = 0;
};

BoundParams bind(ad::Graph& g, const ModelParams& params);
// Binds caller-made leaves given in ModelParams::named_tensors() order.
BoundParams bind_leaves(std::span<const ad::Var> leaves, const ModelDims& dims);
// Gradients of the trainable tensors, aligned with ModelParams::trainable().
std::vector<ad::Tensor> collect_gradients(const ad::Graph& g, const BoundParams& bound);

ad::Var mlp_forward(ad::Var x, const BoundParams::BoundMlp& mlp);

// Attention pooling of [N x D] rows into [1 x D]:
//   a = softmax_m(w2^T tanh(w1 f_m^T)),  out = sum_m a_m f_m.
ad::Var aggregate(ad::Var rows, const BoundParams::BoundAgg& agg);
ad::Var attention_weights(ad::Var rows, const BoundParams::BoundAgg& agg);

// Plain-value pooling of [N x D] rows. An empty region cannot reach here:
// FeatureBag::validate rejects it with kEmptyBag.
ad::Tensor aggregate(const ad::Tensor& rows, const AttentionAggregator& agg);
ad::Tensor attention_weights(const ad::Tensor& rows, const AttentionAggregator& agg);

// Graph embeddings for one slide; row c * 3 + level of `text` holds class c
// at that level. All point tensors hold space components.
struct GraphEmbeddings {
  ad::Var patch_tangent, region_tangent, slide_tangent, text_tangent;
  ad::Var patch, region, slide, text;
  std::vector<std::size_t> patch_region;  // owning region of every patch
  std::size_t num_classes = 0;

  static std::size_t text_row(std::size_t cls, HierarchyLevel level) {
    return cls * kNumLevels + static_cast<std::size_t>(level);
  }
  ad::Var image(HierarchyLevel level) const;
};

GraphEmbeddings embed_slide(ad::Graph& g, const BoundParams& bound, const data::FeatureBag& bag,
                            const lorentz::GeometryConfig& geometry, bool shared_aggregator);

// Plain-value embeddings of one slide.
struct EmbeddingSet {
  std::vector<lorentz::HyperbolicPoint> patches;
  std::vector<lorentz::HyperbolicPoint> regions;
  std::vector<lorentz::HyperbolicPoint> slide;  // exactly one
  std::vector<lorentz::HyperbolicPoint> text;   // classes x 3
  std::vector<std::size_t> patch_region;
  ad::Tensor patch_tangent, region_tangent, slide_tangent;

  const lorentz::HyperbolicPoint& text_at(std::size_t cls, HierarchyLevel level) const {
    return text[GraphEmbeddings::text_row(cls, level)];
  }
};

EmbeddingSet embed_slide(const data::FeatureBag& bag, const ModelParams& params,
                         const lorentz::GeometryConfig& geometry);

std::vector<lorentz::HyperbolicPoint> to_points(const ad::Tensor& space_rows, double curvature);

}  // namespace hypmil::model
