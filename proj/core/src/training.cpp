#include "hypmil/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <unordered_map>

#include "hypmil/adam.hpp"
#include "hypmil/error.hpp"
#include "hypmil/evaluation.hpp"

namespace hypmil::training {

namespace {

double cosine_to(const float* row, const ad::Tensor& base, std::size_t label, std::size_t dim) {
  double dot = 0.0, nr = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double r = row[i], b = base.at(label, i);
    dot += r * b;
    nr += r * r;
    nb += b * b;
  }
  const double denom = std::sqrt(nr) * std::sqrt(nb);
  return denom > 0.0 ? dot / denom : 0.0;
}

std::vector<std::size_t> top_indices(const std::vector<double>& score, std::size_t k) {
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, idx.size());
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

losses::Selection select_top_k(const data::FeatureBag& bag, const ad::Tensor& class_base, std::size_t label,
                               std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "top-K needs K >= 1");
  if (label >= class_base.dim(0)) throw Error(ErrorCode::kInvalidArgument, "label out of range for class base");
  const std::size_t d = bag.dim;
  std::vector<double> patch_score, region_score;
  std::vector<float> mean(d);
  for (const auto& region : bag.regions) {
    const std::size_t n = region.size() / d;
    std::vector<double> acc(d, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      patch_score.push_back(cosine_to(region.data() + p * d, class_base, label, d));
      for (std::size_t i = 0; i < d; ++i) acc[i] += region[p * d + i];
    }
    for (std::size_t i = 0; i < d; ++i) mean[i] = static_cast<float>(acc[i] / static_cast<double>(n));
    region_score.push_back(cosine_to(mean.data(), class_base, label, d));
  }
  return {top_indices(patch_score, k), top_indices(region_score, k)};
}

model::ModelDims dims_for(const data::FeatureBundle& bundle, const TrainConfig& cfg) {
  model::ModelDims dims;
  dims.input_dim = bundle.dim;
  dims.hidden_dim = cfg.hidden_dim == 0 ? bundle.dim : cfg.hidden_dim;
  dims.embed_dim = cfg.embed_dim;
  dims.num_classes = bundle.num_classes();
  dims.shared_aggregator = cfg.shared_aggregator;
  return dims;
}

model::ModelParams initial_params(const data::FeatureBundle& bundle, const TrainConfig& cfg) {
  return model::init_params(dims_for(bundle, cfg), cfg.seed, model::class_base_tensor(bundle));
}

SlideStep slide_step(const data::FeatureBag& bag, const model::ModelParams& params, const TrainConfig& cfg,
                     bool with_grad) {
  const auto geo = cfg.geometry();
  ad::Graph g;
  auto bound = model::bind(g, params);
  auto e = model::embed_slide(g, bound, bag, geo, params.dims.shared_aggregator);
  auto sel = select_top_k(bag, params.class_semantics.base, bag.label, cfg.loss.top_k);
  auto lb = losses::total_loss(e, bag.label, sel, geo, cfg.loss);

  SlideStep out;
  out.total = lb.total.item();
  out.cls = lb.cls.item();
  out.ama = lb.ama.valid() ? lb.ama.item() : 0.0;
  out.shc = lb.shc.valid() ? lb.shc.item() : 0.0;
  out.empty_levels = lb.empty_levels;
  if (with_grad) {
    g.backward(lb.total);
    out.grads = model::collect_gradients(g, bound);
  }
  return out;
}

std::vector<const data::FeatureBag*> lookup(const data::FeatureBundle& bundle, const std::vector<std::string>& ids) {
  std::unordered_map<std::string_view, const data::FeatureBag*> index;
  for (const auto& bag : bundle.bags) index.emplace(bag.slide_id, &bag);
  std::vector<const data::FeatureBag*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw Error(ErrorCode::kInvalidArgument, "unknown slide id '" + id + "'");
    out.push_back(it->second);
  }
  return out;
}

namespace {

bool is_degenerate(const Error& e) { return e.code() == ErrorCode::kDegenerateInput; }

// Higher is better: validation AUC first, then lower NLL.
bool better(const EpochLog& a, const EpochLog& b) {
  if (a.val_auc != b.val_auc) return a.val_auc > b.val_auc;
  return a.val_nll < b.val_nll;
}

}  // namespace

TrainResult train(const data::FeatureBundle& bundle, const std::vector<std::string>& train_ids,
                  const std::vector<std::string>& val_ids, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_ids.empty()) throw Error(ErrorCode::kInvalidArgument, "training set is empty");
  if (bundle.num_classes() < 2) throw Error(ErrorCode::kInvalidArgument, "training needs at least two classes");

  std::vector<std::string> order = train_ids;
  std::sort(order.begin(), order.end());
  std::vector<std::string> val_sorted = val_ids;
  std::sort(val_sorted.begin(), val_sorted.end());
  const auto val_bags = lookup(bundle, val_sorted);
  const auto geo = cfg.geometry();

  TrainResult result;
  model::ModelParams params = initial_params(bundle, cfg);

  {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto* bag : lookup(bundle, order)) {
      try {
        acc += slide_step(*bag, params, cfg, false).total;
        ++n;
      } catch (const Error& e) {
        if (!is_degenerate(e)) throw;
      }
    }
    result.initial_loss = n ? acc / static_cast<double>(n) : 0.0;
  }

  auto trainable = params.trainable();
  std::vector<ad::Tensor*> ptrs;
  std::vector<std::string> names;
  for (auto& t : trainable) {
    ptrs.push_back(t.tensor);
    names.push_back(t.name);
  }
  AdamState adam = AdamState::like(ptrs);

  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0x7a11u};
  std::mt19937_64 rng(seq);

  std::vector<ad::Tensor> accum;
  std::size_t pending = 0;
  auto flush = [&] {
    if (pending == 0) return;
    if (pending > 1) {
      for (auto& t : accum)
        for (double& x : t.values()) x /= static_cast<double>(pending);
    }
    adam_step(ptrs, accum, adam, cfg.lr, names);
    accum.clear();
    pending = 0;
  };

  std::optional<EpochLog> best;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t used = 0;
    for (const auto* bag : lookup(bundle, order)) {
      ++result.steps;
      SlideStep step;
      try {
        step = slide_step(*bag, params, cfg, true);
      } catch (const Error& e) {
        if (!is_degenerate(e)) throw;
        ++log.skipped;
        ++result.skipped;
        continue;
      }
      loss_sum += step.total;
      ++used;
      if (accum.empty()) {
        accum = std::move(step.grads);
      } else {
        for (std::size_t i = 0; i < accum.size(); ++i) {
          auto dst = accum[i].values();
          auto src = step.grads[i].values();
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
      }
      if (++pending == cfg.grad_accum) flush();
    }
    flush();
    log.train_loss = used ? loss_sum / static_cast<double>(used) : 0.0;

    const bool validate = !val_bags.empty() && (epoch % cfg.val_every == 0 || epoch == cfg.epochs);
    if (validate) {
      auto m = evaluation::evaluate(val_bags, params, geo);
      log.val_auc = m.auc.value_or(-1.0);
      log.val_f1 = m.f1;
      log.val_nll = m.nll;
      if (!best || better(log, *best)) {
        best = log;
        result.best_params = params;
        result.best_epoch = epoch;
      }
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  const double limit = cfg.max_skip_fraction * static_cast<double>(result.steps);
  if (static_cast<double>(result.skipped) > limit) {
    throw Error(ErrorCode::kTooManySkips, std::to_string(result.skipped) + " of " + std::to_string(result.steps) +
                                              " slide steps skipped for degenerate geometry");
  }

  result.final_params = params;
  if (!best) {
    result.best_params = params;
    result.best_epoch = cfg.epochs;
  }
  return result;
}

}  // namespace hypmil::training
