#pragma once

// Bag-structured slide features (slide -> regions -> patches) and a
// synthetic generator that mimics frozen-encoder patch features.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace hypmil::data {

struct FeatureBag {
  std::string slide_id;
  std::size_t label = 0;
  std::string site;
  std::size_t dim = 0;
  // One row-major [patches x dim] matrix per region.
  std::vector<std::vector<float>> regions;

  std::size_t num_regions() const noexcept { return regions.size(); }
  std::size_t patches_in(std::size_t region) const { return regions.at(region).size() / dim; }
  std::size_t total_patches() const;

  // Throws kEmptyBag for no regions or an empty region, kShapeMismatch for
  // ragged rows.
  void validate() const;

  friend bool operator==(const FeatureBag&, const FeatureBag&) = default;
};

// A set of bags plus the frozen per-class semantic vectors they are scored
// against (one row of length `dim` per class).
struct FeatureBundle {
  std::size_t dim = 0;
  std::vector<std::string> class_names;
  std::vector<std::vector<float>> class_semantics;
  std::vector<FeatureBag> bags;

  std::size_t num_classes() const noexcept { return class_names.size(); }
  void validate() const;

  friend bool operator==(const FeatureBundle&, const FeatureBundle&) = default;
};

struct SyntheticSpec {
  std::size_t num_classes = 3;
  std::size_t slides_per_class = 30;
  std::size_t regions = 4;
  std::size_t patches = 16;
  std::size_t dim = 32;
  // Spread of class prototypes around a shared direction; larger values
  // give wider pairwise angles.
  double sigma_class = 1.5;
  double sigma_region = 0.05;
  double sigma_patch = 0.15;
  double sigma_site = 0.05;
  // Fraction of patches per region drawn from the class (the rest come
  // from a class-neutral background prototype).
  double purity = 0.3;
  std::size_t sites = 6;
  std::uint64_t seed = 7;

  void validate() const;
};

FeatureBundle generate(const SyntheticSpec& spec);

double cosine(const float* a, const float* b, std::size_t n);
std::vector<double> slide_mean(const FeatureBag& bag);

}  // namespace hypmil::data
