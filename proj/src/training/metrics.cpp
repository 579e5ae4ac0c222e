#include "mmfuse/training/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmfuse/error.hpp"

namespace mmfuse {

Confusion confusion(std::span<const double> p, std::span<const int> labels, double threshold) {
  if (p.empty()) throw MetricError("metric on empty input");
  if (p.size() != labels.size()) {
    throw MetricError("metric inputs differ in length: " + std::to_string(p.size()) + " vs " +
                      std::to_string(labels.size()));
  }
  Confusion c;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw MetricError("labels must be 0 or 1");
    const bool pred = p[i] >= threshold;
    if (pred && labels[i]) ++c.tp;
    else if (pred) ++c.fp;
    else if (labels[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1_from_confusion(const Confusion& c) {
  const double denom = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp) + static_cast<double>(c.fn);
  // 2PR/(P+R) reduces to 2TP/(2TP+FP+FN); both vanish together when TP = 0.
  if (c.tp == 0) return 0.0;
  return 2.0 * static_cast<double>(c.tp) / denom;
}

double f1_score(std::span<const double> p, std::span<const int> labels, double threshold) {
  return f1_from_confusion(confusion(p, labels, threshold));
}

double median(std::vector<double> v) {
  if (v.empty()) throw MetricError("median of an empty list");
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
  const double upper = v[n / 2];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2));
  return 0.5 * (lower + upper);
}

double percentage_difference(double multimodal, double best_unimodal) {
  if (!(best_unimodal > 0.0)) throw MetricError("percentage difference needs a positive unimodal score");
  return 100.0 * (multimodal - best_unimodal) / best_unimodal;
}

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

}  // namespace mmfuse
