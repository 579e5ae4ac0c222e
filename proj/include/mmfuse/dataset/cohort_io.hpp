#pragma once

// Cohort files hold one JSON object per line (one session each). Modality
// tensors are stored as {"shape": [T, D], "data": <base64 little-endian
// doubles>} so a reload is bit-exact.

#include <string>
#include <vector>

#include "mmfuse/dataset/cohort.hpp"
#include "mmfuse/dataset/session.hpp"
#include "mmfuse/util/json_config.hpp"

namespace mmfuse {

util::Json session_to_json(const SessionRecord& session);
/// Throws IoError on malformed records and ValidationError on broken invariants.
SessionRecord session_from_json(const util::Json& json);

util::Json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const util::Json& json);

std::string serialize_cohort(const std::vector<SessionRecord>& sessions);
std::vector<SessionRecord> parse_cohort(const std::string& text);

void write_cohort(const std::string& path, const std::vector<SessionRecord>& sessions);
std::vector<SessionRecord> read_cohort(const std::string& path);

/// Human-readable summary written next to a generated cohort.
util::Json cohort_manifest(const CohortConfig& config, const std::vector<SessionRecord>& sessions);

}  // namespace mmfuse
