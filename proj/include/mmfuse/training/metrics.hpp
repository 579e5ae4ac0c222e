#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mmfuse {

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Predictions are positive when probability >= threshold. Throws MetricError
/// for empty or mismatched inputs and non-binary labels.
Confusion confusion(std::span<const double> probabilities, std::span<const int> labels, double threshold = 0.5);

/// F1 of the positive class; 0 when precision + recall is 0.
double f1_from_confusion(const Confusion& c);
double f1_score(std::span<const double> probabilities, std::span<const int> labels, double threshold = 0.5);

/// Middle order statistic, or the mean of the two middle ones for even counts.
double median(std::vector<double> values);

/// 100 * (multimodal - unimodal) / unimodal. Throws MetricError unless unimodal > 0.
double percentage_difference(double multimodal, double best_unimodal);

double round_to(double value, int decimals);

}  // namespace mmfuse
