#include "hypmil/metrics.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

#include "hypmil/error.hpp"

namespace hypmil::metrics {

double auc_binary(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw Error(ErrorCode::kShapeMismatch, "auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::kUndefinedMetric, "auc is undefined with a single class present");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double auc(const std::vector<std::vector<double>>& probs, std::span<const std::size_t> labels) {
  if (probs.size() != labels.size()) throw Error(ErrorCode::kShapeMismatch, "auc: scores and labels differ in length");
  if (probs.empty()) throw Error(ErrorCode::kUndefinedMetric, "auc of an empty set");
  const std::size_t n_classes = probs.front().size();
  if (std::all_of(labels.begin(), labels.end(), [&](std::size_t y) { return y == labels.front(); })) {
    throw Error(ErrorCode::kUndefinedMetric, "auc is undefined with a single class present");
  }

  const std::size_t n = probs.size();
  std::vector<double> scores(n);
  auto positive = std::make_unique<bool[]>(n);
  auto one_vs_rest = [&](std::size_t c) -> std::pair<bool, double> {
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = probs[i].at(c);
      positive[i] = labels[i] == c;
      n_pos += positive[i];
    }
    if (n_pos == 0 || n_pos == n) return {false, 0.0};
    return {true, auc_binary(scores, std::span<const bool>(positive.get(), n))};
  };

  if (n_classes == 2) return one_vs_rest(1).second;
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto [ok, value] = one_vs_rest(c);
    if (ok) {
      total += value;
      ++used;
    }
  }
  return total / static_cast<double>(used);
}

double f1(std::span<const std::size_t> predictions, std::span<const std::size_t> labels, std::size_t num_classes) {
  if (predictions.size() != labels.size()) throw Error(ErrorCode::kShapeMismatch, "f1: predictions and labels differ in length");
  auto class_f1 = [&](std::size_t c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool p = predictions[i] == c, t = labels[i] == c;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    if (tp == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  };
  if (num_classes == 2) return class_f1(1);
  double total = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) total += class_f1(c);
  return total / static_cast<double>(num_classes);
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace hypmil::metrics
