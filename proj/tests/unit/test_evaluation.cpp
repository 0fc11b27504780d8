#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "hypmil/evaluation.hpp"
#include "hypmil/training.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace hypmil;
using namespace hypmil::evaluation;
using hypmil::testing::small_spec;

namespace {

const data::FeatureBundle& small_bundle() {
  static const auto b = data::generate(small_spec());
  return b;
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  return cfg;
}

std::vector<const data::FeatureBag*> all_bags(const data::FeatureBundle& b) {
  std::vector<const data::FeatureBag*> out;
  for (const auto& bag : b.bags) out.push_back(&bag);
  return out;
}

std::vector<std::string> csv_lines(const std::string& csv) {
  std::vector<std::string> lines;
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

}  // namespace

TEST(Predict, ProbabilitiesAndArgmin) {
  const auto& b = small_bundle();
  const auto cfg = quick_config();
  const auto p = training::initial_params(b, cfg);
  for (const auto& bag : b.bags) {
    const auto pr = predict(bag, p, cfg.geometry());
    ASSERT_EQ(pr.probs.size(), 2u);
    EXPECT_NEAR(pr.probs[0] + pr.probs[1], 1.0, 1e-12);
    const std::size_t argmin = pr.distances[0] <= pr.distances[1] ? 0 : 1;
    EXPECT_EQ(pr.predicted, argmin);
    EXPECT_NEAR(pr.probs[0] / pr.probs[1], std::exp(pr.distances[1] - pr.distances[0]), 1e-9);
  }
}

TEST(Predict, EqualDistancesGiveEvenOdds) {
  const auto& b = small_bundle();
  const auto cfg = quick_config();
  auto p = training::initial_params(b, cfg);
  // Identical text pathways for both classes.
  auto& base = p.class_semantics.base;
  auto& off = p.class_semantics.offsets;
  const std::size_t d = base.dim(1);
  for (std::size_t i = 0; i < d; ++i) base.at(1, i) = base.at(0, i);
  for (std::size_t i = 0; i < 3 * d; ++i) off[3 * d + i] = off[i];
  const auto pr = predict(b.bags.front(), p, cfg.geometry());
  EXPECT_EQ(pr.distances[0], pr.distances[1]);
  EXPECT_EQ(pr.probs[0], 0.5);
  EXPECT_EQ(pr.probs[1], 0.5);
}

TEST(Evaluate, MetricsAreInRangeAndThreadIndependent) {
  const auto& b = small_bundle();
  const auto cfg = quick_config();
  const auto p = training::initial_params(b, cfg);
  const auto m1 = evaluate(all_bags(b), p, cfg.geometry(), 1);
  const auto m4 = evaluate(all_bags(b), p, cfg.geometry(), 4);
  EXPECT_EQ(m1.n, b.bags.size());
  ASSERT_TRUE(m1.auc.has_value());
  EXPECT_GE(*m1.auc, 0.0);
  EXPECT_LE(*m1.auc, 1.0);
  EXPECT_GE(m1.f1, 0.0);
  EXPECT_LE(m1.f1, 1.0);
  EXPECT_GT(m1.nll, 0.0);
  EXPECT_EQ(m1.auc, m4.auc);
  EXPECT_EQ(m1.f1, m4.f1);
  EXPECT_EQ(m1.nll, m4.nll);

  // One class present: AUC undefined, F1 still reported.
  std::vector<const data::FeatureBag*> one;
  for (const auto& bag : b.bags) {
    if (bag.label == 0) one.push_back(&bag);
  }
  EXPECT_FALSE(evaluate(one, p, cfg.geometry()).auc.has_value());
}

TEST(Protocol, ReportCountsAndCells) {
  ProtocolOptions opts;
  opts.n_outer = 2;
  opts.n_inner = 2;
  opts.jobs = 2;
  const auto r = run_protocol(small_bundle(), opts, quick_config());
  ASSERT_EQ(r.folds.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(r.folds[i].outer, i / 2);
    EXPECT_EQ(r.folds[i].inner, i % 2);
    EXPECT_TRUE(r.folds[i].ood.has_value());
  }
  EXPECT_EQ(r.ind_auc.count, 4u);
  EXPECT_EQ(r.ood_auc.count, 4u);
  EXPECT_EQ(r.ind_f1.count, 4u);
  double mean = 0.0;
  for (const auto& f : r.folds) mean += *f.ind.auc / 4.0;
  EXPECT_NEAR(r.ind_auc.mean, mean, 1e-12);
  double ss = 0.0;
  for (const auto& f : r.folds) ss += (*f.ind.auc - mean) * (*f.ind.auc - mean);
  EXPECT_NEAR(r.ind_auc.std, std::sqrt(ss / 3.0), 1e-12);

  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j.at("rows").size(), 8u);
  EXPECT_EQ(j.at("summary").at("ood_auc").at("count"), 4);
  EXPECT_NE(r.summary_table().find("OOD"), std::string::npos);
}

TEST(Protocol, BundleOrderDoesNotChangeTheReport) {
  ProtocolOptions opts;
  opts.n_outer = 2;
  opts.n_inner = 1;
  auto shuffled = small_bundle();
  std::mt19937_64 rng(5);
  std::shuffle(shuffled.bags.begin(), shuffled.bags.end(), rng);
  EXPECT_EQ(run_protocol(small_bundle(), opts, quick_config()).to_json(),
            run_protocol(shuffled, opts, quick_config()).to_json());
}

TEST(Ablate, FourConfigurationsInOrder) {
  ProtocolOptions opts;
  opts.n_outer = 2;
  opts.n_inner = 1;
  opts.jobs = 2;
  TrainConfig cfg = quick_config();
  cfg.epochs = 1;
  const auto reports = ablate(small_bundle(), opts, cfg);
  ASSERT_EQ(reports.size(), 4u);
  EXPECT_EQ(reports[0].name, "CLS");
  EXPECT_EQ(reports[1].name, "CLS+AMA");
  EXPECT_EQ(reports[2].name, "CLS+SHC");
  EXPECT_EQ(reports[3].name, "CLS+AMA+SHC");
  const auto table = ablation_table(reports);
  std::size_t rows = 0;
  for (const auto& line : csv_lines(table)) rows += line.rfind("| ", 0) == 0;
  // Header plus four configurations.
  EXPECT_EQ(rows, 5u) << table;
  EXPECT_EQ(nlohmann::json::parse(ablation_json(reports)).at("ablation").size(), 4u);
}

TEST(Export, RowsProjectionAndOrigin) {
  const auto& b = small_bundle();
  const auto cfg = quick_config();
  const auto p = training::initial_params(b, cfg);
  std::vector<const data::FeatureBag*> subset{&b.bags[0], &b.bags[5]};
  const auto lines = csv_lines(export_embeddings(subset, p, b.class_names, cfg.geometry()));
  ASSERT_FALSE(lines.empty());
  EXPECT_EQ(lines[0], "level,text_level,class,slide_id,distance,px,py");
  std::size_t expect = 2 * 3;
  for (const auto* bag : subset) expect += 1 + bag->num_regions() + bag->total_patches();
  EXPECT_EQ(lines.size() - 1, expect);
  std::size_t text_rows = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = fields(lines[i]);
    ASSERT_EQ(f.size(), 7u) << lines[i];
    text_rows += f[0] == "text";
    const double px = std::stod(f[5]), py = std::stod(f[6]);
    EXPECT_LT(px * px + py * py, 1.0);
    EXPECT_GE(std::stod(f[4]), 0.0);
  }
  EXPECT_EQ(text_rows, 6u);

  const auto o = poincare_2d(lorentz::HyperbolicPoint::origin(4, 1.0));
  EXPECT_EQ(o[0], 0.0);
  EXPECT_EQ(o[1], 0.0);
  const auto far = poincare_2d(lorentz::HyperbolicPoint({1e6, 1e6, 0.0}, 1.0));
  EXPECT_LT(far[0] * far[0] + far[1] * far[1], 1.0);
}

TEST(Radial, StatsArePositive) {
  const auto& b = small_bundle();
  const auto cfg = quick_config();
  const auto r = radial_stats(all_bags(b), training::initial_params(b, cfg), cfg.geometry());
  for (double v : {r.text, r.slide, r.region, r.patch}) EXPECT_GT(v, 0.0);
}
