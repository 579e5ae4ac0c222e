#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mmfuse/dataset/session.hpp"
#include "mmfuse/util/json_config.hpp"

namespace mmfuse {

struct PlantedFeature {
  Modality modality;
  std::size_t index;  // modality-local
};

/// Label-conditioned cross-modal bursts. Positive sessions of `scale` get a
/// burst in every planted feature of all three modalities inside one shared
/// window; negative sessions get, per modality and with probability
/// negative_burst_prob, a burst at an independent onset that never overlaps
/// another modality's burst. Only the co-occurrence separates the classes.
struct PlantedSignal {
  bool enabled = true;
  Scale scale = Scale::PHQ9;
  std::vector<PlantedFeature> features;
  double amplitude = 4.0;
  std::size_t width = 6;
  double negative_burst_prob = 0.75;
};

/// Ten features spread over the three modalities (4 audio, 3 video, 3 text).
std::vector<PlantedFeature> default_planted_features();

struct CohortConfig {
  std::size_t n_participants = 500;
  int min_sessions = 1;
  int max_sessions = 3;
  std::size_t frames = 100;
  std::array<double, 3> prevalence{0.714, 0.578, 0.673};  // indexed by Scale
  PlantedSignal planted{.features = default_planted_features()};
  double noise_ar = 0.5;  // lag-1 autocorrelation of the background noise
  std::array<double, 4> qc_violation_rates{0.05, 0.05, 0.05, 0.05};  // indexed like kQcFlags
  std::size_t probes_per_session = 2;
  std::uint64_t seed = 1;
};

/// Throws ConfigError for infeasible settings.
void validate(const CohortConfig& config);

util::Json to_json(const CohortConfig& config);
/// Strict: unknown keys are rejected. Missing keys keep their defaults.
CohortConfig cohort_config_from_json(const util::Json& json);

std::vector<SessionRecord> generate_cohort(const CohortConfig& config);

/// Per-scale fraction of positive labels.
std::array<double, 3> realized_prevalence(const std::vector<SessionRecord>& sessions);

/// Planted QC violations per flag, indexed like kQcFlags.
std::array<std::size_t, 4> planted_violation_counts(const std::vector<SessionRecord>& sessions);

}  // namespace mmfuse
