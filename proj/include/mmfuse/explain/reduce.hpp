#pragma once

#include <span>
#include <vector>

#include "mmfuse/explain/importance.hpp"
#include "mmfuse/training/experiment.hpp"

namespace mmfuse {

inline constexpr std::array<double, 6> kDefaultReducePercents{5, 10, 25, 50, 75, 100};

struct ReducedRow {
  double pct;
  std::size_t n_features;
  double median_test_f1;
  ExperimentResult result;
};

/// Reruns the repeated protocol once per percentage with only the top-ranked
/// features informative; the others are filled with each repeat's
/// training-split mean. Hyperparameters are resolved once on all features
/// (subject to search_mode) and reused for every row.
std::vector<ReducedRow> reduced_feature_experiment(const std::vector<SessionRecord>& cohort,
                                                   const ExperimentSpec& spec, const GlobalImportance& importance,
                                                   std::span<const double> pcts);

}  // namespace mmfuse
