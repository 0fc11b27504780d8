#pragma once

// Nested site-based splitting: outer folds partition the sites, one fold is
// in-domain (IND) and the rest are out-of-domain (OOD); inner Monte-Carlo
// splits divide the IND slides into train/val/test, stratified by class.
//
// Everything is keyed by slide id and seed, never by bundle order.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hypmil/data.hpp"

namespace hypmil::splits {

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;

  void validate() const;
};

struct InnerSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;

  friend bool operator==(const InnerSplit&, const InnerSplit&) = default;
};

struct OuterFold {
  std::vector<std::string> ind_sites;
  std::vector<std::string> ood_sites;
  std::vector<std::string> ood;  // slide ids from ood_sites
  std::vector<InnerSplit> inner;

  friend bool operator==(const OuterFold&, const OuterFold&) = default;
};

struct SplitPlan {
  std::uint64_t seed = 0;
  std::size_t n_outer = 0;
  std::size_t n_inner = 0;
  SplitRatios ratios;
  std::vector<OuterFold> folds;

  std::size_t num_pairs() const noexcept { return n_outer * n_inner; }

  friend bool operator==(const SplitPlan& a, const SplitPlan& b) {
    return a.seed == b.seed && a.n_outer == b.n_outer && a.n_inner == b.n_inner && a.folds == b.folds;
  }
};

// Sites are shuffled by `seed` and dealt round-robin into n_outer groups;
// fold i takes group i as IND. With n_outer == 1 every site is IND and the
// OOD set is empty. Each class needs at least one train and one test slide
// in every inner split, otherwise kStratification names the fold and class.
SplitPlan make_splits(const data::FeatureBundle& bundle, std::size_t n_outer, std::size_t n_inner,
                      const SplitRatios& ratios, std::uint64_t seed);

std::string to_json(const SplitPlan& plan);
SplitPlan parse_split_plan(const std::string& json_text);
void save_split_plan(const SplitPlan& plan, const std::string& path);
SplitPlan load_split_plan(const std::string& path);

}  // namespace hypmil::splits
