#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hypmil::metrics {

// Probability that a random positive outranks a random negative, ties
// counted half (Mann-Whitney U over average ranks). kUndefinedMetric when
// either class is empty.
double auc_binary(std::span<const double> scores, std::span<const bool> positive);

// probs[i][c]: score of sample i for class c. Two classes: binary AUC of the
// class-1 score. More: mean one-vs-rest AUC over classes that have both
// positives and negatives. kUndefinedMetric when all labels are equal.
double auc(const std::vector<std::vector<double>>& probs, std::span<const std::size_t> labels);

// Two classes: F1 of class 1. More: unweighted mean of per-class F1, with
// 0 for a class whose precision or recall is undefined.
double f1(std::span<const std::size_t> predictions, std::span<const std::size_t> labels, std::size_t num_classes);

std::size_t argmax(std::span<const double> values);

}  // namespace hypmil::metrics
