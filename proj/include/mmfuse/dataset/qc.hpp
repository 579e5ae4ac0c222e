#pragma once

#include <array>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mmfuse/dataset/session.hpp"

namespace mmfuse {

struct QcThresholds {
  double max_frame_failure_fraction = 0.2;  // flag when strictly above
  int min_word_count = 5;                   // flag when strictly below
  double min_legibility = 0.5;              // flag when strictly below
  int max_probe_disagreement = 2;           // flag when |probe - item| >= this
};

std::set<QcFlag> qc_screen(const SessionRecord& session, const QcThresholds& thresholds = {});

struct QcReport {
  std::size_t total = 0;
  std::array<std::size_t, 4> flag_counts{};  // indexed like kQcFlags
  std::vector<std::size_t> passed;           // indices into the screened list
  std::vector<std::size_t> failed;

  /// "passed X of Y sessions"
  std::string summary_line() const;
};

/// Screens every session, stores the flags on the records and reports counts.
QcReport run_qc(std::span<SessionRecord> sessions, const QcThresholds& thresholds = {});

}  // namespace mmfuse
