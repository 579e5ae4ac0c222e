#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mmfuse/explain/attribution.hpp"

namespace mmfuse {

/// Scores over the 197 concatenated features (audio, video, text order).
struct GlobalImportance {
  std::vector<double> scores;
  std::vector<std::size_t> ranking;  // descending score, ties by feature index
};

/// Mean |attribution| over sessions and frames. Throws ContractError when empty.
GlobalImportance global_importance(std::span<const AttributionResult> attributions);
/// Ranking of arbitrary scores with the same tie rule.
GlobalImportance rank_scores(std::vector<double> scores);

/// ceil(pct / 100 * 197); pct must lie in (0, 100].
std::size_t top_k_count(double pct);

struct FeatureSelection {
  std::vector<std::size_t> features;      // global indices, ranked
  std::array<std::vector<char>, 3> keep;  // per-modality input mask
};

FeatureSelection select_top_features(const GlobalImportance& importance, double pct);

struct TimePoint {
  std::size_t frame;
  double seconds;
  double value;
};

/// Per-frame attribution of one global feature. Throws DimensionError for
/// indices outside [0, 197).
std::vector<TimePoint> attribution_timeseries(const AttributionResult& result, std::size_t global_feature);

/// Reads the importance CSV written by importance_csv().
GlobalImportance parse_importance_csv(const std::string& text);

}  // namespace mmfuse
