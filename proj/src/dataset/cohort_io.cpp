#include "mmfuse/dataset/cohort_io.hpp"

#include <sstream>

#include "mmfuse/error.hpp"
#include "mmfuse/util/base64.hpp"

namespace mmfuse {

using util::Json;

Json tensor_to_json(const Tensor& t) {
  return {{"shape", t.shape()}, {"data", util::encode_doubles(t.data())}};
}

Tensor tensor_from_json(const Json& j) {
  try {
    Shape shape = j.at("shape").get<Shape>();
    std::vector<double> data = util::decode_doubles(j.at("data").get<std::string>());
    if (shape.empty() || numel(shape) != data.size()) throw IoError("tensor shape does not match its data length");
    return Tensor(std::move(shape), std::move(data));
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed tensor: ") + e.what());
  } catch (const DimensionError& e) {
    throw IoError(std::string("malformed tensor: ") + e.what());
  }
}

namespace {

Json flags_to_json(const std::set<QcFlag>& flags) {
  Json out = Json::array();
  for (QcFlag f : flags) out.push_back(qc_flag_name(f));
  return out;
}

std::set<QcFlag> flags_from_json(const Json& j) {
  std::set<QcFlag> out;
  for (const Json& e : j) out.insert(parse_qc_flag(e.get<std::string>()));
  return out;
}

template <std::size_t N>
void read_items(const Json& j, std::array<int, N>& out) {
  if (!j.is_array() || j.size() != N) throw IoError("scale item list has the wrong length");
  for (std::size_t i = 0; i < N; ++i) out[i] = j[i].get<int>();
}

}  // namespace

Json session_to_json(const SessionRecord& s) {
  Json probes = Json::array();
  for (const DuplicateProbe& p : s.scales.duplicate_probes) {
    probes.push_back({{"scale", scale_name(p.scale)}, {"item", p.item}, {"response", p.response}});
  }
  Json bursts = Json::object();
  for (Modality m : kModalities) {
    const auto& b = s.planted.burst_start[index_of(m)];
    bursts[std::string(modality_name(m))] = b ? Json(*b) : Json(nullptr);
  }
  Json j;
  j["participant_id"] = s.participant_id;
  j["session_index"] = s.session_index;
  j["frame_failure_fraction"] = s.frame_failure_fraction;
  j["transcription_word_count"] = s.transcription_word_count;
  j["legibility_score"] = s.legibility_score;
  j["scales"] = {{"phq9", s.scales.phq9}, {"gad7", s.scales.gad7}, {"shaps", s.scales.shaps}, {"duplicate_probes", probes}};
  j["qc_flags"] = flags_to_json(s.qc_flags);
  j["planted"] = {{"violations", flags_to_json(s.planted.violations)},
                  {"shared_burst_start", s.planted.shared_burst_start ? Json(*s.planted.shared_burst_start) : Json(nullptr)},
                  {"burst_start", bursts},
                  {"burst_width", s.planted.burst_width}};
  for (Modality m : kModalities) j[std::string(modality_name(m))] = tensor_to_json(s.modality(m));
  return j;
}

SessionRecord session_from_json(const Json& j) {
  SessionRecord s;
  try {
    s.participant_id = j.at("participant_id").get<std::string>();
    s.session_index = j.at("session_index").get<int>();
    s.frame_failure_fraction = j.at("frame_failure_fraction").get<double>();
    s.transcription_word_count = j.at("transcription_word_count").get<int>();
    s.legibility_score = j.at("legibility_score").get<double>();
    const Json& sc = j.at("scales");
    read_items(sc.at("phq9"), s.scales.phq9);
    read_items(sc.at("gad7"), s.scales.gad7);
    read_items(sc.at("shaps"), s.scales.shaps);
    for (const Json& p : sc.at("duplicate_probes")) {
      s.scales.duplicate_probes.push_back(
          {parse_scale(p.at("scale").get<std::string>()), p.at("item").get<std::size_t>(), p.at("response").get<int>()});
    }
    s.qc_flags = flags_from_json(j.at("qc_flags"));
    if (auto it = j.find("planted"); it != j.end()) {
      s.planted.violations = flags_from_json(it->at("violations"));
      const Json& shared = it->at("shared_burst_start");
      if (!shared.is_null()) s.planted.shared_burst_start = shared.get<std::size_t>();
      for (Modality m : kModalities) {
        const Json& b = it->at("burst_start").at(std::string(modality_name(m)));
        if (!b.is_null()) s.planted.burst_start[index_of(m)] = b.get<std::size_t>();
      }
      s.planted.burst_width = it->at("burst_width").get<std::size_t>();
    }
    for (Modality m : kModalities) s.modality(m) = tensor_from_json(j.at(std::string(modality_name(m))));
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed session record: ") + e.what());
  } catch (const ConfigError& e) {
    throw IoError(std::string("malformed session record: ") + e.what());
  }
  validate(s);
  return s;
}

std::string serialize_cohort(const std::vector<SessionRecord>& sessions) {
  std::string out;
  for (const SessionRecord& s : sessions) {
    out += session_to_json(s).dump();
    out += '\n';
  }
  return out;
}

std::vector<SessionRecord> parse_cohort(const std::string& text) {
  std::vector<SessionRecord> sessions;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw IoError("cohort line " + std::to_string(line_no) + ": " + e.what());
    }
    sessions.push_back(session_from_json(j));
  }
  return sessions;
}

void write_cohort(const std::string& path, const std::vector<SessionRecord>& sessions) {
  util::write_text_file(path, serialize_cohort(sessions));
}

std::vector<SessionRecord> read_cohort(const std::string& path) { return parse_cohort(util::read_text_file(path)); }

Json cohort_manifest(const CohortConfig& config, const std::vector<SessionRecord>& sessions) {
  const auto prevalence = realized_prevalence(sessions);
  const auto violations = planted_violation_counts(sessions);
  Json prev = Json::object();
  for (Scale s : kScales) prev[std::string(scale_name(s))] = prevalence[static_cast<std::size_t>(s)];
  Json planted = Json::object();
  for (QcFlag f : kQcFlags) planted[std::string(qc_flag_name(f))] = violations[static_cast<std::size_t>(f)];
  std::set<std::string> participants;
  for (const SessionRecord& s : sessions) participants.insert(s.participant_id);
  return {{"format", "mmfuse-cohort"},
          {"version", 1},
          {"seed", config.seed},
          {"config", to_json(config)},
          {"participants", participants.size()},
          {"sessions", sessions.size()},
          {"realized_prevalence", prev},
          {"planted_violations", planted}};
}

}  // namespace mmfuse
