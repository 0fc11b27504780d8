#include "hypmil/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include "hypmil/error.hpp"
#include "hypmil/metrics.hpp"
#include "hypmil/training.hpp"
#include "json.hpp"

namespace hypmil::evaluation {

using model::HierarchyLevel;
using nlohmann::json;

Prediction predict(const data::FeatureBag& bag, const model::ModelParams& params,
                   const lorentz::GeometryConfig& geo) {
  const auto e = model::embed_slide(bag, params, geo);
  const std::size_t nc = params.dims.num_classes;
  Prediction out;
  out.distances.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    out.distances[c] = lorentz::geodesic(e.slide.front(), e.text_at(c, HierarchyLevel::kSlide), geo);
  }
  const double m = *std::min_element(out.distances.begin(), out.distances.end());
  double z = 0.0;
  out.probs.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) z += out.probs[c] = std::exp(m - out.distances[c]);
  for (double& p : out.probs) p /= z;
  out.predicted = static_cast<std::size_t>(std::min_element(out.distances.begin(), out.distances.end()) -
                                           out.distances.begin());
  return out;
}

namespace {

// Runs f(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// failure by index.
template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& f) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

SetMetrics evaluate(const std::vector<const data::FeatureBag*>& bags, const model::ModelParams& params,
                    const lorentz::GeometryConfig& geo, std::size_t jobs) {
  SetMetrics m;
  m.n = bags.size();
  if (bags.empty()) return m;
  std::vector<Prediction> preds(bags.size());
  parallel_for(bags.size(), jobs, [&](std::size_t i) { preds[i] = predict(*bags[i], params, geo); });

  std::vector<std::vector<double>> probs;
  std::vector<std::size_t> labels, predicted;
  double nll = 0.0;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    probs.push_back(preds[i].probs);
    labels.push_back(bags[i]->label);
    predicted.push_back(preds[i].predicted);
    nll -= std::log(std::max(preds[i].probs.at(bags[i]->label), std::numeric_limits<double>::min()));
  }
  m.nll = nll / static_cast<double>(bags.size());
  m.f1 = metrics::f1(predicted, labels, params.dims.num_classes);
  try {
    m.auc = metrics::auc(probs, labels);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUndefinedMetric) throw;
  }
  return m;
}

// ---------------------------------------------------------------------------

namespace {

Cell cell_of(const std::vector<double>& xs) {
  Cell c;
  c.count = xs.size();
  if (xs.empty()) return c;
  double s = 0.0;
  for (double x : xs) s += x;
  c.mean = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double v = 0.0;
    for (double x : xs) v += (x - c.mean) * (x - c.mean);
    c.std = std::sqrt(v / static_cast<double>(xs.size() - 1));
  }
  return c;
}

std::string fmt(const char* f, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string cell_str(const Cell& c) { return c.count ? fmt("%.3f ± %.3f", c.mean, c.std) : std::string("n/a"); }

// Left-justifies to `width` display columns; counts UTF-8 code points.
std::string pad(const std::string& s, std::size_t width) {
  std::size_t cols = 0;
  for (unsigned char ch : s) cols += (ch & 0xC0) != 0x80;
  return cols < width ? s + std::string(width - cols, ' ') : s;
}

json metrics_json(const SetMetrics& m) {
  json j{{"n", m.n}, {"f1", m.f1}, {"nll", m.nll}};
  j["auc"] = m.auc ? json(*m.auc) : json(nullptr);
  return j;
}

json cell_json(const Cell& c) { return {{"mean", c.mean}, {"std", c.std}, {"count", c.count}}; }

}  // namespace

void MetricReport::summarize() {
  std::vector<double> ia, iff, oa, of;
  for (const auto& f : folds) {
    if (f.ind.auc) ia.push_back(*f.ind.auc);
    iff.push_back(f.ind.f1);
    if (f.ood) {
      if (f.ood->auc) oa.push_back(*f.ood->auc);
      of.push_back(f.ood->f1);
    }
  }
  ind_auc = cell_of(ia);
  ind_f1 = cell_of(iff);
  ood_auc = cell_of(oa);
  ood_f1 = cell_of(of);
}

std::string MetricReport::to_json() const {
  json rows = json::array();
  for (const auto& f : folds) {
    json base{{"outer", f.outer}, {"inner", f.inner}, {"best_epoch", f.best_epoch}, {"skipped", f.skipped}};
    json ind = base;
    ind["domain"] = "IND";
    ind.update(metrics_json(f.ind));
    rows.push_back(ind);
    if (f.ood) {
      json ood = base;
      ood["domain"] = "OOD";
      ood.update(metrics_json(*f.ood));
      rows.push_back(ood);
    }
  }
  json j{{"name", name},
         {"folds", folds.size()},
         {"rows", rows},
         {"summary",
          {{"ind_auc", cell_json(ind_auc)},
           {"ind_f1", cell_json(ind_f1)},
           {"ood_auc", cell_json(ood_auc)},
           {"ood_f1", cell_json(ood_f1)}}}};
  return j.dump(1);
}

std::string MetricReport::summary_table() const {
  std::ostringstream os;
  os << "report " << (name.empty() ? "-" : name) << " over " << folds.size() << " folds\n";
  os << "            AUC              F1\n";
  os << "  IND   " << cell_str(ind_auc) << "   " << cell_str(ind_f1) << "\n";
  os << "  OOD   " << cell_str(ood_auc) << "   " << cell_str(ood_f1) << "\n";
  return os.str();
}

MetricReport run_protocol(const data::FeatureBundle& bundle, const splits::SplitPlan& plan, const TrainConfig& cfg,
                          std::size_t jobs) {
  const auto geo = cfg.geometry();
  MetricReport report;
  report.folds.resize(plan.num_pairs());
  parallel_for(plan.num_pairs(), jobs, [&](std::size_t idx) {
    const std::size_t o = idx / plan.n_inner, i = idx % plan.n_inner;
    const auto& fold = plan.folds.at(o);
    const auto& split = fold.inner.at(i);
    auto result = training::train(bundle, split.train, split.val, cfg);
    FoldResult r;
    r.outer = o;
    r.inner = i;
    r.best_epoch = result.best_epoch;
    r.skipped = result.skipped;
    r.ind = evaluate(training::lookup(bundle, split.test), result.best_params, geo);
    if (!fold.ood.empty()) r.ood = evaluate(training::lookup(bundle, fold.ood), result.best_params, geo);
    report.folds[idx] = std::move(r);
  });
  report.summarize();
  return report;
}

MetricReport run_protocol(const data::FeatureBundle& bundle, const ProtocolOptions& opts, const TrainConfig& cfg) {
  const auto plan = splits::make_splits(bundle, opts.n_outer, opts.n_inner, opts.ratios, cfg.seed);
  return run_protocol(bundle, plan, cfg, opts.jobs);
}

std::vector<MetricReport> ablate(const data::FeatureBundle& bundle, const ProtocolOptions& opts,
                                 const TrainConfig& cfg) {
  struct Variant {
    const char* name;
    double la, ls;
  };
  const Variant variants[] = {{"CLS", 0.0, 0.0},
                              {"CLS+AMA", cfg.loss.lambda_a, 0.0},
                              {"CLS+SHC", 0.0, cfg.loss.lambda_s},
                              {"CLS+AMA+SHC", cfg.loss.lambda_a, cfg.loss.lambda_s}};
  const auto plan = splits::make_splits(bundle, opts.n_outer, opts.n_inner, opts.ratios, cfg.seed);
  std::vector<MetricReport> out;
  for (const auto& v : variants) {
    TrainConfig c = cfg;
    c.loss.lambda_a = v.la;
    c.loss.lambda_s = v.ls;
    auto r = run_protocol(bundle, plan, c, opts.jobs);
    r.name = v.name;
    out.push_back(std::move(r));
  }
  return out;
}

std::string ablation_table(const std::vector<MetricReport>& reports) {
  std::ostringstream os;
  os << "| L_AMA | L_SHC | OOD AUC         | OOD F1          | IND AUC         | IND F1          |\n";
  os << "|-------|-------|-----------------|-----------------|-----------------|-----------------|\n";
  for (const auto& r : reports) {
    const bool a = r.name.find("AMA") != std::string::npos;
    const bool s = r.name.find("SHC") != std::string::npos;
    os << "| " << pad(a ? "x" : "", 5) << " | " << pad(s ? "x" : "", 5);
    for (const Cell* c : {&r.ood_auc, &r.ood_f1, &r.ind_auc, &r.ind_f1}) os << " | " << pad(cell_str(*c), 15);
    os << " |\n";
  }
  return os.str();
}

std::string ablation_json(const std::vector<MetricReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(json::parse(r.to_json()));
  return json{{"ablation", arr}}.dump(1);
}

// ---------------------------------------------------------------------------

std::array<double, 2> poincare_2d(const lorentz::HyperbolicPoint& p) {
  const double denom = p.time() + 1.0 / std::sqrt(p.curvature());
  const auto s = p.space();
  return {s.size() > 0 ? s[0] / denom : 0.0, s.size() > 1 ? s[1] / denom : 0.0};
}

RadialStats radial_stats(const std::vector<const data::FeatureBag*>& bags, const model::ModelParams& params,
                         const lorentz::GeometryConfig& geo) {
  RadialStats r;
  if (bags.empty()) return r;
  std::size_t n_slide = 0, n_region = 0, n_patch = 0;
  bool text_done = false;
  for (const auto* bag : bags) {
    const auto e = model::embed_slide(*bag, params, geo);
    if (!text_done) {
      for (const auto& t : e.text) r.text += lorentz::distance_from_origin(t, geo);
      r.text /= static_cast<double>(e.text.size());
      text_done = true;
    }
    r.slide += lorentz::distance_from_origin(e.slide.front(), geo);
    ++n_slide;
    for (const auto& p : e.regions) r.region += lorentz::distance_from_origin(p, geo);
    n_region += e.regions.size();
    for (const auto& p : e.patches) r.patch += lorentz::distance_from_origin(p, geo);
    n_patch += e.patches.size();
  }
  r.slide /= static_cast<double>(n_slide);
  r.region /= static_cast<double>(n_region);
  r.patch /= static_cast<double>(n_patch);
  return r;
}

std::string export_embeddings(const std::vector<const data::FeatureBag*>& bags, const model::ModelParams& params,
                              const std::vector<std::string>& class_names, const lorentz::GeometryConfig& geo) {
  std::ostringstream os;
  os << "level,text_level,class,slide_id,distance,px,py\n";
  auto row = [&](std::string_view level, std::string_view text_level, const std::string& cls,
                 const std::string& slide, const lorentz::HyperbolicPoint& p) {
    const auto xy = poincare_2d(p);
    char buf[128];
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", lorentz::distance_from_origin(p, geo), xy[0], xy[1]);
    os << level << ',' << text_level << ',' << cls << ',' << slide << buf;
  };
  auto class_name = [&](std::size_t c) { return c < class_names.size() ? class_names[c] : std::to_string(c); };

  for (std::size_t b = 0; b < bags.size(); ++b) {
    const auto e = model::embed_slide(*bags[b], params, geo);
    if (b == 0) {
      for (std::size_t c = 0; c < params.dims.num_classes; ++c)
        for (auto level : model::kLevels) row("text", model::to_string(level), class_name(c), "", e.text_at(c, level));
    }
    const std::string cls = class_name(bags[b]->label);
    const std::string& id = bags[b]->slide_id;
    row("slide", "", cls, id, e.slide.front());
    for (const auto& p : e.regions) row("region", "", cls, id, p);
    for (const auto& p : e.patches) row("patch", "", cls, id, p);
  }
  return os.str();
}

}  // namespace hypmil::evaluation
