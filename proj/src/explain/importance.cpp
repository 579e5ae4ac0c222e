#include "mmfuse/explain/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mmfuse/error.hpp"

namespace mmfuse {

GlobalImportance rank_scores(std::vector<double> scores) {
  GlobalImportance gi;
  gi.ranking.resize(scores.size());
  std::iota(gi.ranking.begin(), gi.ranking.end(), std::size_t{0});
  std::stable_sort(gi.ranking.begin(), gi.ranking.end(),
                   [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  gi.scores = std::move(scores);
  return gi;
}

GlobalImportance global_importance(std::span<const AttributionResult> attributions) {
  if (attributions.empty()) throw ContractError("global importance needs at least one session");
  std::vector<double> sums(kTotalFeatures, 0.0);
  std::vector<double> counts(kTotalFeatures, 0.0);
  for (const AttributionResult& r : attributions) {
    for (Modality m : kModalities) {
      const Tensor& a = r.values[index_of(m)];
      if (a.rank() != 2 || a.dim(1) != feature_dim(m)) throw DimensionError("attribution tensor has the wrong width");
      for (std::size_t t = 0; t < a.dim(0); ++t) {
        for (std::size_t c = 0; c < a.dim(1); ++c) sums[global_feature_index(m, c)] += std::abs(a.at(t, c));
      }
      for (std::size_t c = 0; c < a.dim(1); ++c) counts[global_feature_index(m, c)] += static_cast<double>(a.dim(0));
    }
  }
  for (std::size_t i = 0; i < kTotalFeatures; ++i) sums[i] /= counts[i];
  return rank_scores(std::move(sums));
}

std::size_t top_k_count(double pct) {
  if (!(pct > 0.0 && pct <= 100.0)) throw ConfigError("feature percentage must lie in (0, 100]");
  const double exact = pct * static_cast<double>(kTotalFeatures) / 100.0;
  // Guard against values like 50.000000000001 from binary rounding.
  const auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::clamp<std::size_t>(k, 1, kTotalFeatures);
}

FeatureSelection select_top_features(const GlobalImportance& gi, double pct) {
  if (gi.ranking.size() != kTotalFeatures) throw DimensionError("importance must cover all 197 features");
  const std::size_t k = top_k_count(pct);
  FeatureSelection sel;
  for (Modality m : kModalities) sel.keep[index_of(m)].assign(feature_dim(m), 0);
  sel.features.assign(gi.ranking.begin(), gi.ranking.begin() + static_cast<std::ptrdiff_t>(k));
  for (std::size_t g : sel.features) {
    const auto [m, local] = split_global_index(g);
    sel.keep[index_of(m)][local] = 1;
  }
  return sel;
}

std::vector<TimePoint> attribution_timeseries(const AttributionResult& r, std::size_t global_feature) {
  if (global_feature >= kTotalFeatures) {
    throw DimensionError("feature index " + std::to_string(global_feature) + " outside [0, 197)");
  }
  const auto [m, local] = split_global_index(global_feature);
  const Tensor& a = r.values[index_of(m)];
  std::vector<TimePoint> out;
  for (std::size_t t = 0; t < a.dim(0); ++t) {
    out.push_back({t, static_cast<double>(t) * kFrameSeconds, a.at(t, local)});
  }
  return out;
}

GlobalImportance parse_importance_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "rank,feature_name,modality,score") {
    throw IoError("importance file lacks the rank,feature_name,modality,score header");
  }
  std::vector<double> scores(kTotalFeatures, -1.0);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string rank, name, modality, score;
    if (!std::getline(fields, rank, ',') || !std::getline(fields, name, ',') || !std::getline(fields, modality, ',') ||
        !std::getline(fields, score)) {
      throw IoError("malformed importance row: " + line);
    }
    try {
      const Modality m = parse_modality(modality);
      scores[global_feature_index(m, find_feature(m, name))] = std::stod(score);
    } catch (const ConfigError& e) {
      throw IoError(std::string("importance row: ") + e.what());
    } catch (const std::logic_error&) {
      throw IoError("importance row has a non-numeric score: " + line);
    }
    ++rows;
  }
  if (rows != kTotalFeatures || std::any_of(scores.begin(), scores.end(), [](double s) { return s < 0.0; })) {
    throw IoError("importance file must list each of the 197 features once");
  }
  return rank_scores(std::move(scores));
}

}  // namespace mmfuse
