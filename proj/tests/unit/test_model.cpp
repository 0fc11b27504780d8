#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hypmil/checkpoint.hpp"
#include "hypmil/data.hpp"
#include "hypmil/error.hpp"
#include "hypmil/model.hpp"
#include "hypmil/training.hpp"
#include "test_support.hpp"

using namespace hypmil;
using namespace hypmil::model;
using ad::Shape;
using ad::Tensor;
using hypmil::testing::small_spec;

namespace {

ModelDims tiny_dims(bool shared = false) {
  ModelDims d;
  d.input_dim = 8;
  d.hidden_dim = 8;
  d.embed_dim = 4;
  d.num_classes = 2;
  d.shared_aggregator = shared;
  return d;
}

Tensor random_rows(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t(Shape{n, d});
  for (double& x : t.values()) x = dist(rng);
  return t;
}

void expect_probability_vector(const Tensor& w) {
  double total = 0.0;
  for (double x : w.values()) {
    EXPECT_GE(x, 0.0);
    total += x;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

data::FeatureBag single_patch_bag() {
  data::FeatureBag bag;
  bag.slide_id = "s";
  bag.dim = 8;
  bag.regions = {{0.3f, -0.2f, 0.5f, 0.1f, 0.0f, 0.9f, -0.4f, 0.2f}};
  return bag;
}

lorentz::GeometryConfig geo(std::size_t k = 4) {
  lorentz::GeometryConfig g;
  g.dim = k;
  return g;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(HierarchyLevel, Relations) {
  EXPECT_EQ(subordinate(HierarchyLevel::kSlide), HierarchyLevel::kRegion);
  EXPECT_EQ(subordinate(HierarchyLevel::kRegion), HierarchyLevel::kPatch);
  EXPECT_FALSE(subordinate(HierarchyLevel::kPatch).has_value());
  EXPECT_EQ(superordinate(HierarchyLevel::kPatch), HierarchyLevel::kRegion);
  EXPECT_FALSE(superordinate(HierarchyLevel::kSlide).has_value());
  EXPECT_EQ(to_string(HierarchyLevel::kRegion), "region");
}

TEST(Aggregate, SingleRowIsIdentity) {
  std::mt19937_64 rng(1);
  const auto p = init_params(tiny_dims(), 3);
  const Tensor row = random_rows(rng, 1, 4);
  EXPECT_EQ(aggregate(row, p.agg_patch_region).storage(), row.storage());
}

TEST(Aggregate, IdenticalRowsGiveThatRow) {
  const auto p = init_params(tiny_dims(), 3);
  Tensor rows(Shape{5, 4});
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 4; ++c) rows.at(r, c) = 0.25 * static_cast<double>(c) - 0.3;
  }
  const Tensor out = aggregate(rows, p.agg_patch_region);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out[c], rows.at(0, c), 1e-15);
}

TEST(Aggregate, ZeroScoringWeightsGiveTheMean) {
  std::mt19937_64 rng(2);
  auto p = init_params(tiny_dims(), 3);
  p.agg_patch_region.w2.fill(0.0);
  const Tensor rows = random_rows(rng, 6, 4);
  const Tensor out = aggregate(rows, p.agg_patch_region);
  for (std::size_t c = 0; c < 4; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < 6; ++r) mean += rows.at(r, c) / 6.0;
    EXPECT_NEAR(out[c], mean, 1e-14);
  }
}

TEST(Aggregate, WeightsAreAProbabilityVector) {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = init_params(tiny_dims(), seed);
    expect_probability_vector(attention_weights(random_rows(rng, 7, 4), p.agg_patch_region));
  }
}

TEST(Aggregate, PermutationInvariance) {
  std::mt19937_64 rng(4);
  const auto p = init_params(tiny_dims(), 5);
  const Tensor rows = random_rows(rng, 5, 4);
  const std::size_t perm[] = {3, 0, 4, 1, 2};
  Tensor shuffled(Shape{5, 4});
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 4; ++c) shuffled.at(r, c) = rows.at(perm[r], c);
  }
  const Tensor w = attention_weights(rows, p.agg_patch_region);
  const Tensor ws = attention_weights(shuffled, p.agg_patch_region);
  for (std::size_t r = 0; r < 5; ++r) EXPECT_NEAR(ws[r], w[perm[r]], 1e-15);
  const Tensor a = aggregate(rows, p.agg_patch_region), b = aggregate(shuffled, p.agg_patch_region);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(a[c], b[c], 1e-14);
}

TEST(Init, DeterministicAndSeedSensitive) {
  EXPECT_EQ(init_params(tiny_dims(), 9), init_params(tiny_dims(), 9));
  EXPECT_FALSE(init_params(tiny_dims(), 9) == init_params(tiny_dims(), 10));
  EXPECT_EQ(encode_checkpoint(init_params(tiny_dims(), 9)), encode_checkpoint(init_params(tiny_dims(), 9)));
}

TEST(Init, ShapesAndDefaults) {
  const auto d = tiny_dims();
  const auto p = init_params(d, 1);
  EXPECT_EQ(p.adaptor_image.w1.shape(), (Shape{8, 8}));
  EXPECT_EQ(p.adaptor_image.w2.shape(), (Shape{4, 8}));
  EXPECT_EQ(p.adaptor_image.b2[0], 0.1);
  EXPECT_NEAR(std::exp(p.adaptor_image.log_scale[0]), 0.5, 1e-15);
  EXPECT_EQ(p.agg_patch_region.w1.shape(), (Shape{1, 4}));
  EXPECT_EQ(p.class_semantics.base.shape(), (Shape{2, 8}));
  EXPECT_EQ(p.class_semantics.offsets.shape(), (Shape{2, 3, 8}));
  for (std::size_t c = 0; c < 2; ++c) {
    double ss = 0.0;
    for (std::size_t i = 0; i < 8; ++i) ss += p.class_semantics.base.at(c, i) * p.class_semantics.base.at(c, i);
    EXPECT_NEAR(ss, 1.0, 1e-12);
  }
  // The frozen base is stored but never trained.
  EXPECT_EQ(p.named_tensors().size(), p.trainable().size() + 1);
  const auto shared = init_params(tiny_dims(true), 1);
  EXPECT_EQ(shared.named_tensors().size(), p.named_tensors().size() - 2);
  EXPECT_EQ(&shared.region_slide_aggregator(), &shared.agg_patch_region);
  EXPECT_EQ(code_of([] {
              ModelDims bad = tiny_dims();
              bad.embed_dim = 1;
              init_params(bad, 0);
            }),
            ErrorCode::kConfig);
}

TEST(EmbedSlide, SinglePatchBagCollapsesLevels) {
  const auto p = init_params(tiny_dims(), 2);
  const auto e = embed_slide(single_patch_bag(), p, geo());
  EXPECT_EQ(e.patch_tangent.storage(), e.region_tangent.storage());
  EXPECT_EQ(e.region_tangent.storage(), e.slide_tangent.storage());
  ASSERT_EQ(e.patches.size(), 1u);
  EXPECT_EQ(e.regions.size(), 1u);
  EXPECT_EQ(e.slide.size(), 1u);
  EXPECT_EQ(e.text.size(), 6u);
}

TEST(EmbedSlide, ShapesOnManifoldAndDeterministic) {
  const auto bundle = data::generate(small_spec());
  TrainConfig cfg;
  cfg.embed_dim = 4;
  const auto p = training::initial_params(bundle, cfg);
  const auto& bag = bundle.bags.front();
  const auto a = embed_slide(bag, p, cfg.geometry());
  const auto b = embed_slide(bag, p, cfg.geometry());
  EXPECT_EQ(a.patches.size(), bag.total_patches());
  EXPECT_EQ(a.regions.size(), bag.num_regions());
  EXPECT_EQ(a.patch_region, (std::vector<std::size_t>{0, 0, 0, 0, 1, 1, 1, 1}));
  for (std::size_t i = 0; i < a.patches.size(); ++i) {
    EXPECT_TRUE(std::equal(a.patches[i].space().begin(), a.patches[i].space().end(), b.patches[i].space().begin()));
    EXPECT_NEAR(lorentz::lorentz_inner(a.patches[i], a.patches[i]), -1.0, 1e-9);
  }
  EXPECT_EQ(a.slide_tangent.storage(), b.slide_tangent.storage());

  // Graph and plain forward passes agree.
  ad::Graph g;
  const auto bound = bind(g, p);
  const auto ge = embed_slide(g, bound, bag, cfg.geometry(), false);
  for (std::size_t i = 0; i < ge.patch.value().size(); ++i) {
    EXPECT_EQ(ge.patch.value()[i], a.patches[i / 4].space()[i % 4]);
  }
  EXPECT_EQ(ge.text.value().shape(), (Shape{6, 4}));
}

TEST(EmbedSlide, RejectsDimensionMismatchAndEmptyRegions) {
  const auto p = init_params(tiny_dims(), 2);
  auto bag = single_patch_bag();
  bag.dim = 4;
  bag.regions = {{1.f, 2.f, 3.f, 4.f}};
  EXPECT_EQ(code_of([&] { embed_slide(bag, p, geo()); }), ErrorCode::kShapeMismatch);
  bag = single_patch_bag();
  bag.regions.push_back({});
  EXPECT_EQ(code_of([&] { embed_slide(bag, p, geo()); }), ErrorCode::kEmptyBag);
}

TEST(Init, EmbeddingsStartAwayFromTheOrigin) {
  double smallest = 1e9;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto bundle = data::generate(small_spec(seed));
    TrainConfig cfg;
    cfg.seed = seed;
    const auto p = training::initial_params(bundle, cfg);
    const auto e = embed_slide(bundle.bags[seed % bundle.bags.size()], p, cfg.geometry());
    for (const auto* set : {&e.patches, &e.regions, &e.slide, &e.text}) {
      for (const auto& pt : *set) smallest = std::min(smallest, pt.space_norm());
    }
  }
  EXPECT_GT(smallest, 1e-3);
}

TEST(Init, AttentionAtInitIsAProbabilityVector) {
  const auto bundle = data::generate(small_spec());
  const auto p = training::initial_params(bundle, TrainConfig{});
  const auto e = embed_slide(bundle.bags.front(), p, TrainConfig{}.geometry());
  expect_probability_vector(attention_weights(e.region_tangent, p.region_slide_aggregator()));
}

TEST(GradientFlow, EveryTrainableTensorReceivesGradient) {
  const auto bundle = data::generate(small_spec());
  for (bool shared : {false, true}) {
    TrainConfig cfg;
    cfg.shared_aggregator = shared;
    const auto p = training::initial_params(bundle, cfg);
    const auto step = training::slide_step(bundle.bags.front(), p, cfg);
    const auto names = p.trainable();
    ASSERT_EQ(step.grads.size(), names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
      bool nonzero = false;
      for (double v : step.grads[i].values()) nonzero |= v != 0.0;
      EXPECT_TRUE(nonzero) << names[i].name;
    }
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  hypmil::testing::TempDir dir;
  for (bool shared : {false, true}) {
    const auto p = init_params(tiny_dims(shared), 4);
    save_checkpoint(p, dir.file("p.ckpt"));
    const auto q = load_checkpoint(dir.file("p.ckpt"));
    EXPECT_EQ(p, q);
    EXPECT_EQ(encode_checkpoint(q), hypmil::testing::read_bytes(dir.file("p.ckpt")));
  }
  const std::string bytes = encode_checkpoint(init_params(tiny_dims(), 4));
  EXPECT_EQ(bytes.substr(0, 5), "HPCK1");
}

TEST(Checkpoint, Errors) {
  const std::string ck = encode_checkpoint(init_params(tiny_dims(), 4));
  std::string bad = ck;
  bad[0] = 'X';
  EXPECT_EQ(code_of([&] { decode_checkpoint(bad); }), ErrorCode::kBadMagic);
  bad = ck;
  bad[5] = 2;
  EXPECT_EQ(code_of([&] { decode_checkpoint(bad); }), ErrorCode::kVersionMismatch);
  EXPECT_EQ(code_of([&] { decode_checkpoint(ck.substr(0, ck.size() - 1)); }), ErrorCode::kTruncated);
  EXPECT_EQ(code_of([&] { decode_checkpoint(ck.substr(0, 3)); }), ErrorCode::kTruncated);
  EXPECT_EQ(code_of([&] { decode_checkpoint(ck + "x"); }), ErrorCode::kManifest);
  EXPECT_EQ(code_of([] { load_checkpoint("/nonexistent/p.ckpt"); }), ErrorCode::kIo);
}
