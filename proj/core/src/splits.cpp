#include "hypmil/splits.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "hypmil/error.hpp"
#include "hypmil/io_util.hpp"
#include "json.hpp"

namespace hypmil::splits {

using nlohmann::json;

void SplitRatios::validate() const {
  if (train <= 0.0 || test <= 0.0 || val < 0.0) throw Error(ErrorCode::kInvalidArgument, "split ratios must be positive");
  if (std::fabs(train + val + test - 1.0) > 1e-9) throw Error(ErrorCode::kInvalidArgument, "split ratios must sum to 1");
}

namespace {

struct Counts {
  std::size_t train, val, test;
};

// Per-class split sizes. Test and train get at least one slide each when
// possible; validation yields first.
Counts split_counts(std::size_t n, const SplitRatios& r) {
  if (n < 2) return {n, 0, 0};
  std::size_t test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(r.test * n)));
  std::size_t val = static_cast<std::size_t>(std::llround(r.val * n));
  if (test >= n) test = n - 1;
  if (test + val >= n) val = n - test - 1;
  return {n - test - val, val, test};
}

}  // namespace

SplitPlan make_splits(const data::FeatureBundle& bundle, std::size_t n_outer, std::size_t n_inner,
                      const SplitRatios& ratios, std::uint64_t seed) {
  if (n_outer < 1 || n_inner < 1) throw Error(ErrorCode::kInvalidArgument, "n_outer and n_inner must be >= 1");
  ratios.validate();

  std::map<std::string, std::vector<const data::FeatureBag*>> by_site;
  std::set<std::string> ids;
  for (const auto& bag : bundle.bags) {
    if (!ids.insert(bag.slide_id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate slide id '" + bag.slide_id + "'");
    }
    by_site[bag.site].push_back(&bag);
  }
  if (by_site.size() < n_outer) {
    throw Error(ErrorCode::kStratification, "need at least " + std::to_string(n_outer) + " sites, have " +
                                                std::to_string(by_site.size()));
  }

  std::vector<std::string> sites;
  for (const auto& [site, _] : by_site) sites.push_back(site);
  {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5e1au};
    std::mt19937_64 rng(seq);
    std::shuffle(sites.begin(), sites.end(), rng);
  }
  std::vector<std::vector<std::string>> groups(n_outer);
  for (std::size_t i = 0; i < sites.size(); ++i) groups[i % n_outer].push_back(sites[i]);
  for (auto& g : groups) std::sort(g.begin(), g.end());

  SplitPlan plan;
  plan.seed = seed;
  plan.n_outer = n_outer;
  plan.n_inner = n_inner;
  plan.ratios = ratios;

  const std::size_t n_classes = bundle.num_classes();
  for (std::size_t o = 0; o < n_outer; ++o) {
    OuterFold fold;
    fold.ind_sites = groups[o];
    for (std::size_t g = 0; g < n_outer; ++g) {
      if (g != o) fold.ood_sites.insert(fold.ood_sites.end(), groups[g].begin(), groups[g].end());
    }
    std::sort(fold.ood_sites.begin(), fold.ood_sites.end());

    std::vector<std::vector<std::string>> ind_by_class(n_classes);
    for (const auto& site : fold.ind_sites) {
      for (const auto* bag : by_site[site]) ind_by_class.at(bag->label).push_back(bag->slide_id);
    }
    for (const auto& site : fold.ood_sites) {
      for (const auto* bag : by_site[site]) fold.ood.push_back(bag->slide_id);
    }
    std::sort(fold.ood.begin(), fold.ood.end());
    for (std::size_t c = 0; c < n_classes; ++c) {
      std::sort(ind_by_class[c].begin(), ind_by_class[c].end());
      if (ind_by_class[c].size() < 2) {
        throw Error(ErrorCode::kStratification,
                    "outer fold " + std::to_string(o) + ": class '" + bundle.class_names[c] + "' has " +
                        std::to_string(ind_by_class[c].size()) + " in-domain slides, need at least 2");
      }
    }

    for (std::size_t i = 0; i < n_inner; ++i) {
      InnerSplit split;
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(o), static_cast<std::uint32_t>(i)};
      std::mt19937_64 rng(seq);
      for (std::size_t c = 0; c < n_classes; ++c) {
        auto members = ind_by_class[c];
        std::shuffle(members.begin(), members.end(), rng);
        const Counts n = split_counts(members.size(), ratios);
        auto it = members.begin();
        split.train.insert(split.train.end(), it, it + static_cast<std::ptrdiff_t>(n.train));
        it += static_cast<std::ptrdiff_t>(n.train);
        split.val.insert(split.val.end(), it, it + static_cast<std::ptrdiff_t>(n.val));
        it += static_cast<std::ptrdiff_t>(n.val);
        split.test.insert(split.test.end(), it, members.end());
      }
      std::sort(split.train.begin(), split.train.end());
      std::sort(split.val.begin(), split.val.end());
      std::sort(split.test.begin(), split.test.end());
      fold.inner.push_back(std::move(split));
    }
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

std::string to_json(const SplitPlan& plan) {
  json j;
  j["seed"] = plan.seed;
  j["n_outer"] = plan.n_outer;
  j["n_inner"] = plan.n_inner;
  j["ratios"] = {{"train", plan.ratios.train}, {"val", plan.ratios.val}, {"test", plan.ratios.test}};
  json folds = json::array();
  for (const auto& f : plan.folds) {
    json inner = json::array();
    for (const auto& s : f.inner) inner.push_back({{"train", s.train}, {"val", s.val}, {"test", s.test}});
    folds.push_back({{"ind_sites", f.ind_sites}, {"ood_sites", f.ood_sites}, {"ood", f.ood}, {"inner", inner}});
  }
  j["folds"] = folds;
  return j.dump(1);
}

SplitPlan parse_split_plan(const std::string& json_text) {
  try {
    const json j = json::parse(json_text);
    SplitPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.n_outer = j.at("n_outer").get<std::size_t>();
    plan.n_inner = j.at("n_inner").get<std::size_t>();
    plan.ratios.train = j.at("ratios").at("train").get<double>();
    plan.ratios.val = j.at("ratios").at("val").get<double>();
    plan.ratios.test = j.at("ratios").at("test").get<double>();
    for (const auto& f : j.at("folds")) {
      OuterFold fold;
      fold.ind_sites = f.at("ind_sites").get<std::vector<std::string>>();
      fold.ood_sites = f.at("ood_sites").get<std::vector<std::string>>();
      fold.ood = f.at("ood").get<std::vector<std::string>>();
      for (const auto& s : f.at("inner")) {
        fold.inner.push_back({s.at("train").get<std::vector<std::string>>(), s.at("val").get<std::vector<std::string>>(),
                              s.at("test").get<std::vector<std::string>>()});
      }
      plan.folds.push_back(std::move(fold));
    }
    if (plan.folds.size() != plan.n_outer) throw Error(ErrorCode::kManifest, "split plan fold count mismatch");
    for (const auto& f : plan.folds) {
      if (f.inner.size() != plan.n_inner) throw Error(ErrorCode::kManifest, "split plan inner count mismatch");
    }
    return plan;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kManifest, std::string("bad split plan: ") + e.what());
  }
}

void save_split_plan(const SplitPlan& plan, const std::string& path) { io::write_file_atomic(path, to_json(plan)); }

SplitPlan load_split_plan(const std::string& path) { return parse_split_plan(io::read_file(path)); }

}  // namespace hypmil::splits
