#include "mmfuse/explain/export.hpp"

#include <cstdio>
#include <sstream>

#include "mmfuse/error.hpp"
#include "mmfuse/training/results_io.hpp"

namespace mmfuse {

namespace {

// Round-trip precision for attribution values and scores.
std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string attributions_csv(std::span<const std::string> ids, std::span<const AttributionResult> results) {
  if (ids.size() != results.size()) throw ContractError("one session id per attribution result is required");
  std::ostringstream out;
  out << "session_id,modality,feature_index,feature_name,frame,timestamp_s,shap_value\n";
  for (std::size_t s = 0; s < results.size(); ++s) {
    for (Modality m : kModalities) {
      const Tensor& a = results[s].values[index_of(m)];
      for (std::size_t c = 0; c < a.dim(1); ++c) {
        for (std::size_t t = 0; t < a.dim(0); ++t) {
          out << csv_field(ids[s]) << ',' << modality_name(m) << ',' << c << ',' << feature_name(m, c) << ',' << t
              << ',' << format_number(static_cast<double>(t) * kFrameSeconds, 1) << ',' << exact(a.at(t, c)) << '\n';
        }
      }
    }
  }
  return out.str();
}

std::string importance_csv(const GlobalImportance& gi) {
  std::ostringstream out;
  out << "rank,feature_name,modality,score\n";
  for (std::size_t r = 0; r < gi.ranking.size(); ++r) {
    const auto [m, local] = split_global_index(gi.ranking[r]);
    out << r + 1 << ',' << feature_name(m, local) << ',' << modality_name(m) << ',' << exact(gi.scores[gi.ranking[r]])
        << '\n';
  }
  return out.str();
}

std::string timeseries_csv(const std::string& session_id, std::size_t global_feature,
                           const std::vector<TimePoint>& series) {
  const auto [m, local] = split_global_index(global_feature);
  std::ostringstream out;
  out << "session_id,modality,feature_name,frame,timestamp_s,shap_value\n";
  for (const TimePoint& p : series) {
    out << csv_field(session_id) << ',' << modality_name(m) << ',' << feature_name(m, local) << ',' << p.frame << ','
        << format_number(p.seconds, 1) << ',' << exact(p.value) << '\n';
  }
  return out.str();
}

std::string reduced_csv(std::span<const ReducedRow> rows) {
  std::ostringstream out;
  out << "pct,n_features,median_test_f1\n";
  for (const ReducedRow& r : rows) {
    out << format_number(r.pct, 0) << ',' << r.n_features << ',' << format_number(r.median_test_f1, 6) << '\n';
  }
  return out.str();
}

}  // namespace mmfuse
