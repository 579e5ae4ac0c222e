#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmfuse/explain/importance.hpp"
#include "mmfuse/explain/reduce.hpp"

namespace mmfuse {

/// session_id, modality, feature_index, feature_name, frame, timestamp_s, shap_value
std::string attributions_csv(std::span<const std::string> session_ids, std::span<const AttributionResult> results);

/// rank, feature_name, modality, score (197 rows)
std::string importance_csv(const GlobalImportance& importance);

/// session_id, modality, feature_name, frame, timestamp_s, shap_value
std::string timeseries_csv(const std::string& session_id, std::size_t global_feature,
                           const std::vector<TimePoint>& series);

/// pct, n_features, median_test_f1
std::string reduced_csv(std::span<const ReducedRow> rows);

}  // namespace mmfuse
