#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "mmfuse/dataset/features.hpp"
#include "mmfuse/dataset/scales.hpp"
#include "mmfuse/numerics/tensor.hpp"

namespace mmfuse {

enum class QcFlag { FrameCaptureFailure, MissingTranscription, IllegibleSpeech, InconsistentScales };

inline constexpr std::array<QcFlag, 4> kQcFlags{QcFlag::FrameCaptureFailure, QcFlag::MissingTranscription,
                                                QcFlag::IllegibleSpeech, QcFlag::InconsistentScales};

std::string_view qc_flag_name(QcFlag f);
QcFlag parse_qc_flag(std::string_view name);

/// Generator-side ground truth kept with synthetic sessions.
struct PlantedTruth {
  std::set<QcFlag> violations;
  /// Set for label-positive sessions: the cross-modal burst shared by all modalities.
  std::optional<std::size_t> shared_burst_start;
  /// Per-modality burst onset (shared or independent), when a burst exists.
  std::array<std::optional<std::size_t>, 3> burst_start;
  std::size_t burst_width = 0;
};

struct SessionRecord {
  std::string participant_id;
  int session_index = 1;
  Tensor audio;  // [T, 123]
  Tensor video;  // [T, 22]
  Tensor text;   // [T, 52]
  double frame_failure_fraction = 0.0;
  int transcription_word_count = 0;
  double legibility_score = 1.0;
  ScaleResponses scales;
  std::set<QcFlag> qc_flags;
  PlantedTruth planted;

  const Tensor& modality(Modality m) const;
  Tensor& modality(Modality m);
  std::size_t frames() const { return audio.dim(0); }
  /// "<participant>-s<index>"
  std::string id() const;
};

/// Throws ValidationError when the record breaks the session invariants
/// (aligned frame counts, fixed feature widths, value ranges).
void validate(const SessionRecord& session);

}  // namespace mmfuse
