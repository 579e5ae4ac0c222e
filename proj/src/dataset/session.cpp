#include "mmfuse/dataset/session.hpp"

#include <string>

#include "mmfuse/error.hpp"

namespace mmfuse {

std::string_view qc_flag_name(QcFlag f) {
  switch (f) {
    case QcFlag::FrameCaptureFailure: return "FrameCaptureFailure";
    case QcFlag::MissingTranscription: return "MissingTranscription";
    case QcFlag::IllegibleSpeech: return "IllegibleSpeech";
    case QcFlag::InconsistentScales: return "InconsistentScales";
  }
  throw ContractError("unknown QC flag");
}

QcFlag parse_qc_flag(std::string_view name) {
  for (QcFlag f : kQcFlags) {
    if (qc_flag_name(f) == name) return f;
  }
  throw ValidationError("unknown QC flag '" + std::string(name) + "'");
}

const Tensor& SessionRecord::modality(Modality m) const {
  switch (m) {
    case Modality::Audio: return audio;
    case Modality::Video: return video;
    case Modality::Text: return text;
  }
  throw ContractError("unknown modality");
}

Tensor& SessionRecord::modality(Modality m) {
  return const_cast<Tensor&>(static_cast<const SessionRecord*>(this)->modality(m));
}

std::string SessionRecord::id() const { return participant_id + "-s" + std::to_string(session_index); }

void validate(const SessionRecord& s) {
  if (s.session_index < 1 || s.session_index > 3) throw ValidationError(s.id() + ": session index outside [1, 3]");
  std::size_t frames = 0;
  for (Modality m : kModalities) {
    const Tensor& x = s.modality(m);
    if (x.rank() != 2 || x.dim(1) != feature_dim(m)) {
      throw ValidationError(s.id() + ": " + std::string(modality_name(m)) + " tensor has shape " +
                            shape_string(x.shape()) + ", expected [T, " + std::to_string(feature_dim(m)) + "]");
    }
    if (m == Modality::Audio) frames = x.dim(0);
    if (x.dim(0) != frames) throw ValidationError(s.id() + ": modality frame counts differ");
  }
  if (!(s.frame_failure_fraction >= 0.0 && s.frame_failure_fraction <= 1.0)) {
    throw ValidationError(s.id() + ": frame_failure_fraction outside [0, 1]");
  }
  if (s.transcription_word_count < 0) throw ValidationError(s.id() + ": negative word count");
  if (!(s.legibility_score >= 0.0 && s.legibility_score <= 1.0)) {
    throw ValidationError(s.id() + ": legibility_score outside [0, 1]");
  }
  validate(s.scales);
}

}  // namespace mmfuse
