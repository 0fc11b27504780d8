#include "hypmil/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "hypmil/error.hpp"

namespace hypmil::data {

std::size_t FeatureBag::total_patches() const {
  std::size_t n = 0;
  for (std::size_t r = 0; r < regions.size(); ++r) n += patches_in(r);
  return n;
}

void FeatureBag::validate() const {
  if (dim == 0) throw Error(ErrorCode::kShapeMismatch, "slide '" + slide_id + "' has zero feature dimension");
  if (regions.empty()) throw Error(ErrorCode::kEmptyBag, "slide '" + slide_id + "' has no regions");
  for (std::size_t r = 0; r < regions.size(); ++r) {
    if (regions[r].empty()) {
      throw Error(ErrorCode::kEmptyBag, "slide '" + slide_id + "' region " + std::to_string(r) + " has no patches");
    }
    if (regions[r].size() % dim != 0) {
      throw Error(ErrorCode::kShapeMismatch,
                  "slide '" + slide_id + "' region " + std::to_string(r) + " is not a multiple of dim");
    }
  }
}

void FeatureBundle::validate() const {
  if (class_names.empty()) throw Error(ErrorCode::kManifest, "bundle has no classes");
  if (class_semantics.size() != class_names.size()) {
    throw Error(ErrorCode::kManifest, "class semantics count differs from class count");
  }
  for (const auto& row : class_semantics) {
    if (row.size() != dim) throw Error(ErrorCode::kShapeMismatch, "class semantic vector of wrong length");
  }
  for (const auto& bag : bags) {
    if (bag.dim != dim) throw Error(ErrorCode::kShapeMismatch, "slide '" + bag.slide_id + "' feature dim mismatch");
    if (bag.label >= class_names.size()) {
      throw Error(ErrorCode::kManifest, "slide '" + bag.slide_id + "' label out of range");
    }
    bag.validate();
  }
}

void SyntheticSpec::validate() const {
  if (num_classes < 1 || slides_per_class < 1 || regions < 1 || patches < 1 || dim < 1 || sites < 1) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic spec counts must be >= 1");
  }
  if (!(purity > 0.0 && purity <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "purity must be in (0, 1]");
  if (!(sigma_class > 0.0 && sigma_region > 0.0 && sigma_patch > 0.0 && sigma_site > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic sigmas must be positive");
  }
}

namespace {

using Vec = std::vector<double>;

Vec gaussian(std::mt19937_64& rng, std::size_t n, double sigma) {
  std::normal_distribution<double> dist(0.0, sigma);
  Vec v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Vec normalized(Vec v) {
  const double n = norm(v);
  for (auto& x : v) x /= n;
  return v;
}

Vec unit(std::mt19937_64& rng, std::size_t n) { return normalized(gaussian(rng, n, 1.0)); }

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

FeatureBundle generate(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t d = spec.dim;
  std::mt19937_64 rng(spec.seed);

  const Vec common = unit(rng, d);
  std::vector<Vec> protos;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    Vec dir = unit(rng, d);
    Vec p(d);
    for (std::size_t i = 0; i < d; ++i) p[i] = common[i] + spec.sigma_class * dir[i];
    protos.push_back(normalized(std::move(p)));
  }

  // Background carries no class information: remove its projection on the
  // span of the class prototypes (when the dimension leaves room).
  Vec background = unit(rng, d);
  if (spec.num_classes < d) {
    std::vector<Vec> basis;
    for (const auto& p : protos) {
      Vec q = p;
      for (const auto& b : basis) {
        double dp = 0.0;
        for (std::size_t i = 0; i < d; ++i) dp += q[i] * b[i];
        for (std::size_t i = 0; i < d; ++i) q[i] -= dp * b[i];
      }
      if (norm(q) > 1e-9) basis.push_back(normalized(std::move(q)));
    }
    for (const auto& b : basis) {
      double dp = 0.0;
      for (std::size_t i = 0; i < d; ++i) dp += background[i] * b[i];
      for (std::size_t i = 0; i < d; ++i) background[i] -= dp * b[i];
    }
    background = normalized(std::move(background));
  }

  std::vector<Vec> site_shift;
  for (std::size_t s = 0; s < spec.sites; ++s) site_shift.push_back(gaussian(rng, d, spec.sigma_site));

  FeatureBundle bundle;
  bundle.dim = d;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    bundle.class_names.push_back(numbered("class_", c, 1));
    std::vector<float> row(d);
    for (std::size_t i = 0; i < d; ++i) row[i] = static_cast<float>(protos[c][i]);
    bundle.class_semantics.push_back(std::move(row));
  }

  const std::size_t class_patches =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(spec.purity * static_cast<double>(spec.patches))));
  const int id_width = spec.num_classes * spec.slides_per_class > 9999 ? 6 : 4;

  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t s = 0; s < spec.slides_per_class; ++s) {
      const std::size_t index = c * spec.slides_per_class + s;
      std::seed_seq seq{static_cast<std::uint64_t>(spec.seed), static_cast<std::uint64_t>(index)};
      std::mt19937_64 srng(seq);
      const std::size_t site = index % spec.sites;

      FeatureBag bag;
      bag.slide_id = numbered("slide_", index, id_width);
      bag.label = c;
      bag.site = numbered("site_", site, 2);
      bag.dim = d;
      for (std::size_t r = 0; r < spec.regions; ++r) {
        Vec region_proto = gaussian(srng, d, spec.sigma_region);
        for (std::size_t i = 0; i < d; ++i) region_proto[i] += protos[c][i];
        std::vector<bool> informative(spec.patches, false);
        std::fill_n(informative.begin(), std::min(class_patches, spec.patches), true);
        std::shuffle(informative.begin(), informative.end(), srng);

        std::vector<float> m(spec.patches * d);
        for (std::size_t p = 0; p < spec.patches; ++p) {
          const Vec& center = informative[p] ? region_proto : background;
          Vec noise = gaussian(srng, d, spec.sigma_patch);
          for (std::size_t i = 0; i < d; ++i) {
            m[p * d + i] = static_cast<float>(center[i] + noise[i] + site_shift[site][i]);
          }
        }
        bag.regions.push_back(std::move(m));
      }
      bundle.bags.push_back(std::move(bag));
    }
  }
  return bundle;
}

double cosine(const float* a, const float* b, std::size_t n) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

std::vector<double> slide_mean(const FeatureBag& bag) {
  std::vector<double> m(bag.dim, 0.0);
  std::size_t n = 0;
  for (const auto& region : bag.regions) {
    for (std::size_t i = 0; i < region.size(); ++i) m[i % bag.dim] += region[i];
    n += region.size() / bag.dim;
  }
  for (auto& x : m) x /= static_cast<double>(n);
  return m;
}

}  // namespace hypmil::data
