#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "hypmil/error.hpp"
#include "hypmil/splits.hpp"
#include "test_support.hpp"

using namespace hypmil;
using namespace hypmil::splits;
using hypmil::testing::small_spec;

namespace {

const data::FeatureBundle& default_bundle() {
  static const auto b = data::generate(data::SyntheticSpec{});
  return b;
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

TEST(MakeSplits, PairCounts) {
  EXPECT_EQ(make_splits(default_bundle(), 3, 5, SplitRatios{}, 1).num_pairs(), 15u);
  EXPECT_EQ(make_splits(default_bundle(), 5, 3, SplitRatios{}, 1).num_pairs(), 15u);
  const auto plan = make_splits(default_bundle(), 3, 5, SplitRatios{}, 1);
  ASSERT_EQ(plan.folds.size(), 3u);
  for (const auto& f : plan.folds) EXPECT_EQ(f.inner.size(), 5u);
}

TEST(MakeSplits, SiteDisjointAndCovering) {
  const auto& b = default_bundle();
  std::map<std::string, std::string> site_of;
  for (const auto& bag : b.bags) site_of[bag.slide_id] = bag.site;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto plan = make_splits(b, 3, 5, SplitRatios{}, seed);
    std::set<std::string> seen_ind;
    for (const auto& f : plan.folds) {
      for (const auto& s : f.ind_sites) {
        EXPECT_EQ(std::count(f.ood_sites.begin(), f.ood_sites.end(), s), 0);
        EXPECT_TRUE(seen_ind.insert(s).second);
      }
      std::set<std::string> ind(f.ind_sites.begin(), f.ind_sites.end());
      for (const auto& id : f.ood) EXPECT_EQ(ind.count(site_of.at(id)), 0u);
      for (const auto& s : f.inner) {
        std::vector<std::string> all;
        for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(all.end(), part->begin(), part->end());
        std::set<std::string> unique(all.begin(), all.end());
        EXPECT_EQ(unique.size(), all.size());
        for (const auto& id : all) EXPECT_EQ(ind.count(site_of.at(id)), 1u);
        EXPECT_EQ(all.size() + f.ood.size(), b.bags.size());
      }
    }
    EXPECT_EQ(seen_ind.size(), 6u);
  }
}

TEST(MakeSplits, StratifiedRatios) {
  const auto& b = default_bundle();
  std::map<std::string, std::size_t> label_of;
  for (const auto& bag : b.bags) label_of[bag.slide_id] = bag.label;
  const auto plan = make_splits(b, 3, 5, SplitRatios{}, 4);
  for (const auto& f : plan.folds) {
    for (const auto& s : f.inner) {
      for (const auto* part : {&s.train, &s.test}) {
        std::set<std::size_t> classes;
        for (const auto& id : *part) classes.insert(label_of.at(id));
        EXPECT_EQ(classes.size(), b.num_classes());
      }
      const double n = static_cast<double>(s.train.size() + s.val.size() + s.test.size());
      EXPECT_NEAR(static_cast<double>(s.train.size()) / n, 0.6, 0.1);
    }
  }
}

TEST(MakeSplits, InnerSplitsDiffer) {
  const auto plan = make_splits(default_bundle(), 3, 5, SplitRatios{}, 4);
  EXPECT_FALSE(plan.folds[0].inner[0] == plan.folds[0].inner[1]);
}

TEST(MakeSplits, SingleOuterFoldHasNoOod) {
  const auto plan = make_splits(default_bundle(), 1, 2, SplitRatios{}, 4);
  EXPECT_TRUE(plan.folds[0].ood.empty());
  EXPECT_TRUE(plan.folds[0].ood_sites.empty());
  EXPECT_EQ(plan.folds[0].ind_sites.size(), 6u);
}

TEST(MakeSplits, DeterministicAndIndependentOfBundleOrder) {
  auto b = default_bundle();
  const auto a = make_splits(b, 3, 5, SplitRatios{}, 9);
  EXPECT_EQ(a, make_splits(b, 3, 5, SplitRatios{}, 9));
  std::mt19937_64 rng(1);
  std::shuffle(b.bags.begin(), b.bags.end(), rng);
  EXPECT_EQ(a, make_splits(b, 3, 5, SplitRatios{}, 9));
  EXPECT_FALSE(a == make_splits(b, 3, 5, SplitRatios{}, 10));
}

TEST(MakeSplits, Errors) {
  const auto small = data::generate(small_spec());
  EXPECT_EQ(code_of([&] { make_splits(small, 5, 1, SplitRatios{}, 0); }), ErrorCode::kStratification);
  EXPECT_EQ(code_of([&] { make_splits(small, 0, 1, SplitRatios{}, 0); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { make_splits(small, 1, 1, SplitRatios{0.5, 0.5, 0.5}, 0); }), ErrorCode::kInvalidArgument);

  // Two slides per class cannot feed train and test from a single IND site.
  auto spec = small_spec();
  spec.slides_per_class = 2;
  spec.sites = 2;
  const auto tiny = data::generate(spec);
  try {
    make_splits(tiny, 2, 1, SplitRatios{}, 0);
    FAIL() << "expected a stratification error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStratification);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("fold"), std::string::npos) << msg;
    EXPECT_NE(msg.find("class"), std::string::npos) << msg;
  }

  auto dup = small;
  dup.bags[1].slide_id = dup.bags[0].slide_id;
  EXPECT_EQ(code_of([&] { make_splits(dup, 1, 1, SplitRatios{}, 0); }), ErrorCode::kInvalidArgument);
}

TEST(SplitPlan, JsonRoundTrip) {
  hypmil::testing::TempDir dir;
  const auto plan = make_splits(default_bundle(), 3, 5, SplitRatios{}, 2);
  EXPECT_EQ(parse_split_plan(to_json(plan)), plan);
  save_split_plan(plan, dir.file("s.json"));
  EXPECT_EQ(load_split_plan(dir.file("s.json")), plan);
  EXPECT_EQ(code_of([] { parse_split_plan("{}"); }), ErrorCode::kManifest);
}
