#include "mmfuse/dataset/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "mmfuse/dataset/qc.hpp"
#include "mmfuse/error.hpp"
#include "mmfuse/numerics/rng.hpp"

namespace mmfuse {

std::vector<PlantedFeature> default_planted_features() {
  const std::vector<std::pair<Modality, const char*>> named{
      {Modality::Audio, "mfcc_1"},
      {Modality::Audio, "shimmer"},
      {Modality::Audio, "logarithmic_energy"},
      {Modality::Audio, "contrast_spectrogram_3"},
      {Modality::Video, "AU16_lower_lip_depressor"},
      {Modality::Video, "AU10_upper_lip_raiser"},
      {Modality::Video, "AU12_lip_corner_puller"},
      {Modality::Text, "polarity"},
      {Modality::Text, "valence"},
      {Modality::Text, "subjectivity"},
  };
  std::vector<PlantedFeature> out;
  for (const auto& [m, name] : named) out.push_back({m, find_feature(m, name)});
  return out;
}

void validate(const CohortConfig& c) {
  if (c.n_participants == 0) throw ConfigError("cohort: n_participants must be positive");
  if (c.min_sessions < 1 || c.max_sessions > 3 || c.min_sessions > c.max_sessions) {
    throw ConfigError("cohort: sessions per participant must satisfy 1 <= min <= max <= 3");
  }
  for (double p : c.prevalence) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("cohort: prevalence targets must lie in (0, 1)");
  }
  if (!(c.noise_ar > -1.0 && c.noise_ar < 1.0)) throw ConfigError("cohort: noise_ar must lie in (-1, 1)");
  for (double r : c.qc_violation_rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("cohort: QC violation rates must lie in [0, 1]");
  }
  if (c.frames < 1) throw ConfigError("cohort: frames must be positive");
  const PlantedSignal& p = c.planted;
  if (!p.enabled) return;
  if (p.features.empty()) throw ConfigError("cohort: planted signal needs at least one feature");
  for (const PlantedFeature& f : p.features) {
    if (f.index >= feature_dim(f.modality)) {
      throw ConfigError("cohort: planted " + std::string(modality_name(f.modality)) + " feature index " +
                        std::to_string(f.index) + " out of range");
    }
  }
  if (p.width < 1) throw ConfigError("cohort: planted burst width must be positive");
  // Three pairwise-disjoint windows must always fit for negatives.
  if (c.frames < 5 * p.width) throw ConfigError("cohort: frames must be at least 5x the planted burst width");
  if (!std::isfinite(p.amplitude)) throw ConfigError("cohort: planted amplitude must be finite");
  if (!(p.negative_burst_prob >= 0.0 && p.negative_burst_prob <= 1.0)) {
    throw ConfigError("cohort: negative_burst_prob must lie in [0, 1]");
  }
}

util::Json to_json(const CohortConfig& c) {
  util::Json features = util::Json::array();
  for (const PlantedFeature& f : c.planted.features) {
    features.push_back({{"modality", modality_name(f.modality)}, {"feature", feature_name(f.modality, f.index)}});
  }
  util::Json rates = util::Json::object();
  for (QcFlag f : kQcFlags) rates[std::string(qc_flag_name(f))] = c.qc_violation_rates[static_cast<std::size_t>(f)];
  return {
      {"n_participants", c.n_participants},
      {"min_sessions", c.min_sessions},
      {"max_sessions", c.max_sessions},
      {"frames", c.frames},
      {"prevalence", c.prevalence},
      {"planted",
       {{"enabled", c.planted.enabled},
        {"scale", scale_name(c.planted.scale)},
        {"features", features},
        {"amplitude", c.planted.amplitude},
        {"width", c.planted.width},
        {"negative_burst_prob", c.planted.negative_burst_prob}}},
      {"noise_ar", c.noise_ar},
      {"qc_violation_rates", rates},
      {"probes_per_session", c.probes_per_session},
      {"seed", c.seed},
  };
}

CohortConfig cohort_config_from_json(const util::Json& j) {
  using namespace util;
  const char* ctx = "cohort";
  require_object(j, ctx);
  reject_unknown_keys(j,
                      {"n_participants", "min_sessions", "max_sessions", "frames", "prevalence", "planted",
                       "noise_ar", "qc_violation_rates", "probes_per_session", "seed"},
                      ctx);
  CohortConfig c;
  read_optional(j, "n_participants", c.n_participants, ctx);
  read_optional(j, "min_sessions", c.min_sessions, ctx);
  read_optional(j, "max_sessions", c.max_sessions, ctx);
  read_optional(j, "frames", c.frames, ctx);
  read_optional(j, "prevalence", c.prevalence, ctx);
  read_optional(j, "noise_ar", c.noise_ar, ctx);
  read_optional(j, "probes_per_session", c.probes_per_session, ctx);
  read_optional(j, "seed", c.seed, ctx);
  if (auto it = j.find("qc_violation_rates"); it != j.end()) {
    require_object(*it, "cohort.qc_violation_rates");
    for (auto r = it->begin(); r != it->end(); ++r) {
      QcFlag f;
      try {
        f = parse_qc_flag(r.key());
      } catch (const ValidationError& e) {
        throw ConfigError(std::string("cohort.qc_violation_rates: ") + e.what());
      }
      read_optional(*it, r.key().c_str(), c.qc_violation_rates[static_cast<std::size_t>(f)], "cohort.qc_violation_rates");
    }
  }
  if (auto it = j.find("planted"); it != j.end()) {
    const char* pctx = "cohort.planted";
    require_object(*it, pctx);
    reject_unknown_keys(*it, {"enabled", "scale", "features", "amplitude", "width", "negative_burst_prob"}, pctx);
    PlantedSignal& p = c.planted;
    read_optional(*it, "enabled", p.enabled, pctx);
    if (it->contains("scale")) p.scale = parse_scale(read_required<std::string>(*it, "scale", pctx));
    read_optional(*it, "amplitude", p.amplitude, pctx);
    read_optional(*it, "width", p.width, pctx);
    read_optional(*it, "negative_burst_prob", p.negative_burst_prob, pctx);
    if (auto f = it->find("features"); f != it->end()) {
      if (!f->is_array()) throw ConfigError("cohort.planted.features must be an array");
      p.features.clear();
      for (const Json& e : *f) {
        require_object(e, "cohort.planted.features[]");
        reject_unknown_keys(e, {"modality", "feature", "index"}, "cohort.planted.features[]");
        const Modality m = parse_modality(read_required<std::string>(e, "modality", "cohort.planted.features[]"));
        if (e.contains("feature")) {
          p.features.push_back({m, find_feature(m, read_required<std::string>(e, "feature", "cohort.planted.features[]"))});
        } else {
          p.features.push_back({m, read_required<std::size_t>(e, "index", "cohort.planted.features[]")});
        }
      }
    }
  }
  validate(c);
  return c;
}

namespace {

constexpr std::size_t kQcFrame = 0, kQcWords = 1, kQcLegibility = 2, kQcProbe = 3;

std::string participant_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%05zu", index + 1);
  return buf;
}

// Total drawn uniformly from the side of the threshold matching the label, then
// spread over items one unit at a time.
void sample_scale(Scale s, int label, RngStream& rng, ScaleResponses& out) {
  const std::size_t n = item_count(s);
  const ItemRange range = item_range(s);
  const int min_total = static_cast<int>(n) * range.lo;
  const int max_total = static_cast<int>(n) * range.hi;
  const int threshold = label_spec(s).threshold;
  const int total = label ? rng.uniform_int(threshold + 1, max_total) : rng.uniform_int(min_total, threshold);
  std::vector<std::size_t> open(n);
  std::iota(open.begin(), open.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) out.item(s, i) = range.lo;
  for (int units = total - min_total; units > 0; --units) {
    const std::size_t pick = static_cast<std::size_t>(rng.uniform_index(open.size()));
    int& v = out.item(s, open[pick]);
    ++v;
    if (v == range.hi) open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
  }
}

void fill_noise(Tensor& x, double rho, RngStream& rng) {
  const std::size_t T = x.dim(0), D = x.dim(1);
  const double innovation = std::sqrt(1.0 - rho * rho);
  for (std::size_t c = 0; c < D; ++c) {
    double prev = rng.normal();
    x.at(0, c) = prev;
    for (std::size_t t = 1; t < T; ++t) {
      prev = rho * prev + innovation * rng.normal();
      x.at(t, c) = prev;
    }
  }
}

void add_burst(SessionRecord& s, const PlantedSignal& p, Modality m, std::size_t start) {
  Tensor& x = s.modality(m);
  for (const PlantedFeature& f : p.features) {
    if (f.modality != m) continue;
    for (std::size_t t = start; t < start + p.width; ++t) x.at(t, f.index) += p.amplitude;
  }
}

}  // namespace

std::vector<SessionRecord> generate_cohort(const CohortConfig& config) {
  validate(config);
  const RngStream root(config.seed);

  RngStream structure = root.derive("structure");
  std::vector<SessionRecord> sessions;
  for (std::size_t p = 0; p < config.n_participants; ++p) {
    const int count = structure.uniform_int(config.min_sessions, config.max_sessions);
    for (int k = 1; k <= count; ++k) {
      SessionRecord s;
      s.participant_id = participant_id(p);
      s.session_index = k;
      sessions.push_back(std::move(s));
    }
  }
  const std::size_t n = sessions.size();

  // Exact positive quota per scale, assigned to a random subset of sessions.
  std::vector<Labels> labels(n, Labels{});
  for (Scale sc : kScales) {
    const std::size_t si = static_cast<std::size_t>(sc);
    RngStream rng = root.derive("labels").derive(static_cast<std::uint64_t>(si));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    const auto quota = static_cast<std::size_t>(std::llround(config.prevalence[si] * static_cast<double>(n)));
    for (std::size_t i = 0; i < quota && i < n; ++i) labels[order[i]][si] = 1;
  }

  const PlantedSignal& planted = config.planted;
  const std::size_t planted_scale = static_cast<std::size_t>(planted.scale);
  const std::size_t T = config.frames;
  for (std::size_t i = 0; i < n; ++i) {
    SessionRecord& s = sessions[i];
    const RngStream srng = root.derive("session").derive(static_cast<std::uint64_t>(i));

    RngStream scale_rng = srng.derive("scales");
    for (Scale sc : kScales) sample_scale(sc, labels[i][static_cast<std::size_t>(sc)], scale_rng, s.scales);
    for (std::size_t k = 0; k < config.probes_per_session; ++k) {
      const Scale sc = kScales[scale_rng.uniform_index(3)];
      const std::size_t item = static_cast<std::size_t>(scale_rng.uniform_index(item_count(sc)));
      const ItemRange range = item_range(sc);
      const int original = s.scales.item(sc, item);
      const int response = std::clamp(original + scale_rng.uniform_int(-1, 1), range.lo, range.hi);
      s.scales.duplicate_probes.push_back({sc, item, response});
    }

    RngStream meta = srng.derive("metadata");
    s.frame_failure_fraction = meta.uniform(0.0, 0.15);
    s.transcription_word_count = meta.uniform_int(20, 200);
    s.legibility_score = meta.uniform(0.6, 1.0);
    RngStream violations = srng.derive("violations");
    std::array<bool, 4> violate{};
    for (std::size_t f = 0; f < 4; ++f) violate[f] = violations.bernoulli(config.qc_violation_rates[f]);
    if (violate[kQcFrame]) s.frame_failure_fraction = violations.uniform(0.3, 0.9);
    if (violate[kQcWords]) s.transcription_word_count = violations.uniform_int(0, 4);
    if (violate[kQcLegibility]) s.legibility_score = violations.uniform(0.0, 0.4);
    if (violate[kQcProbe]) {
      if (s.scales.duplicate_probes.empty()) {
        const std::size_t item = static_cast<std::size_t>(violations.uniform_index(item_count(Scale::PHQ9)));
        s.scales.duplicate_probes.push_back({Scale::PHQ9, item, 0});
      }
      DuplicateProbe& probe =
          s.scales.duplicate_probes[violations.uniform_index(s.scales.duplicate_probes.size())];
      const ItemRange range = item_range(probe.scale);
      const int original = s.scales.item(probe.scale, probe.item);
      probe.response = original - range.lo >= 2 ? range.lo : range.hi;
    }
    for (std::size_t f = 0; f < 4; ++f) {
      if (violate[f]) s.planted.violations.insert(kQcFlags[f]);
    }

    RngStream noise = srng.derive("noise");
    for (Modality m : kModalities) {
      s.modality(m) = Tensor({T, feature_dim(m)});
      RngStream mrng = noise.derive(static_cast<std::uint64_t>(index_of(m)));
      fill_noise(s.modality(m), config.noise_ar, mrng);
    }

    if (planted.enabled) {
      RngStream burst = srng.derive("burst");
      const std::size_t slots = T - planted.width + 1;
      s.planted.burst_width = planted.width;
      if (labels[i][planted_scale]) {
        const std::size_t start = static_cast<std::size_t>(burst.uniform_index(slots));
        s.planted.shared_burst_start = start;
        for (Modality m : kModalities) s.planted.burst_start[index_of(m)] = start;
      } else {
        std::vector<std::size_t> taken;
        for (Modality m : kModalities) {
          if (!burst.bernoulli(planted.negative_burst_prob)) continue;
          std::size_t start = 0;
          for (;;) {
            start = static_cast<std::size_t>(burst.uniform_index(slots));
            const bool clear = std::all_of(taken.begin(), taken.end(), [&](std::size_t o) {
              return (start > o ? start - o : o - start) >= planted.width;
            });
            if (clear) break;
          }
          taken.push_back(start);
          s.planted.burst_start[index_of(m)] = start;
        }
      }
      for (Modality m : kModalities) {
        if (s.planted.burst_start[index_of(m)]) add_burst(s, planted, m, *s.planted.burst_start[index_of(m)]);
      }
    }
    s.qc_flags = qc_screen(s);
  }
  return sessions;
}

std::array<double, 3> realized_prevalence(const std::vector<SessionRecord>& sessions) {
  std::array<double, 3> out{};
  if (sessions.empty()) return out;
  for (const SessionRecord& s : sessions) {
    const Labels l = derive_labels(s.scales);
    for (std::size_t k = 0; k < 3; ++k) out[k] += l[k];
  }
  for (double& v : out) v /= static_cast<double>(sessions.size());
  return out;
}

std::array<std::size_t, 4> planted_violation_counts(const std::vector<SessionRecord>& sessions) {
  std::array<std::size_t, 4> out{};
  for (const SessionRecord& s : sessions) {
    for (QcFlag f : s.planted.violations) ++out[static_cast<std::size_t>(f)];
  }
  return out;
}

}  // namespace mmfuse
