#include "mmfuse/dataset/qc.hpp"

#include <cstdlib>

namespace mmfuse {

std::set<QcFlag> qc_screen(const SessionRecord& s, const QcThresholds& th) {
  std::set<QcFlag> flags;
  if (s.frame_failure_fraction > th.max_frame_failure_fraction) flags.insert(QcFlag::FrameCaptureFailure);
  if (s.transcription_word_count < th.min_word_count) flags.insert(QcFlag::MissingTranscription);
  if (s.legibility_score < th.min_legibility) flags.insert(QcFlag::IllegibleSpeech);
  for (const DuplicateProbe& p : s.scales.duplicate_probes) {
    if (std::abs(p.response - s.scales.item(p.scale, p.item)) >= th.max_probe_disagreement) {
      flags.insert(QcFlag::InconsistentScales);
      break;
    }
  }
  return flags;
}

std::string QcReport::summary_line() const {
  return "passed " + std::to_string(passed.size()) + " of " + std::to_string(total) + " sessions";
}

QcReport run_qc(std::span<SessionRecord> sessions, const QcThresholds& thresholds) {
  QcReport report;
  report.total = sessions.size();
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    sessions[i].qc_flags = qc_screen(sessions[i], thresholds);
    for (QcFlag f : sessions[i].qc_flags) ++report.flag_counts[static_cast<std::size_t>(f)];
    (sessions[i].qc_flags.empty() ? report.passed : report.failed).push_back(i);
  }
  return report;
}

}  // namespace mmfuse
