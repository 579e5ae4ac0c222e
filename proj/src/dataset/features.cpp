#include "mmfuse/dataset/features.hpp"

#include <algorithm>
#include <vector>

#include "mmfuse/error.hpp"

namespace mmfuse {

namespace {

void numbered(std::vector<std::string>& out, const std::string& stem, int count) {
  for (int i = 1; i <= count; ++i) out.push_back(stem + "_" + std::to_string(i));
}

std::vector<std::string> audio_names() {
  std::vector<std::string> n = {
      // prosodic
      "pause_rate", "speaking_rate", "f0_mean", "f0_std", "f0_range", "voiced_fraction", "intensity_mean",
      "intensity_std",
      // glottal
      "normalised_amplitude_quotient", "quasi_open_quotient", "h1_h2", "harmonic_richness_factor",
      "parabolic_spectral_parameter", "maxima_dispersion_quotient", "peak_slope", "creak_probability",
      // phonation
      "jitter", "shimmer", "harmonics_to_noise_ratio", "logarithmic_energy",
      // spectral summaries
      "spectral_centroid", "spectral_spread", "spectral_flux", "spectral_rolloff", "spectral_flatness",
      "zero_crossing_rate"};
  numbered(n, "mfcc", 13);
  numbered(n, "delta_mfcc", 13);
  numbered(n, "contrast_spectrogram", 7);
  numbered(n, "chroma_energy_normalized_spectrogram", 12);
  numbered(n, "chroma_spectrogram", 12);
  numbered(n, "stft_energy_spectrogram", 12);
  numbered(n, "mel_spectrogram", 28);
  return n;
}

std::vector<std::string> video_names() {
  return {"AU01_inner_brow_raiser",    "AU02_outer_brow_raiser", "AU04_brow_lowerer",
          "AU05_upper_lid_raiser",     "AU06_cheek_raiser",      "AU07_lid_tightener",
          "AU09_nose_wrinkler",        "AU10_upper_lip_raiser",  "AU11_nasolabial_deepener",
          "AU12_lip_corner_puller",    "AU13_sharp_lip_puller",  "AU14_dimpler",
          "AU15_lip_corner_depressor", "AU16_lower_lip_depressor", "AU17_chin_raiser",
          "AU18_lip_pucker",           "AU20_lip_stretcher",     "AU22_lip_funneler",
          "AU23_lip_tightener",        "AU24_lip_pressor",       "AU25_lips_part",
          "AU26_jaw_drop"};
}

std::vector<std::string> text_names() {
  std::vector<std::string> n = {"arousal",
                                "valence",
                                "dominance",
                                "polarity",
                                "subjectivity",
                                "number_of_characters",
                                "number_of_words",
                                "number_of_syllables",
                                "noun_tag",
                                "proper_noun_tag",
                                "singular_noun_tag",
                                "plural_noun_tag",
                                "verb_tag",
                                "adjective_tag",
                                "adverb_tag",
                                "pronoun_tag",
                                "coordinating_conjunction_tag",
                                "determiner_tag",
                                "preposition_tag",
                                "interjection_tag"};
  numbered(n, "doc2vec", 32);
  return n;
}

const std::array<std::vector<std::string>, 3>& all_names() {
  static const std::array<std::vector<std::string>, 3> names = [] {
    std::array<std::vector<std::string>, 3> n{audio_names(), video_names(), text_names()};
    if (n[0].size() != kAudioFeatures || n[1].size() != kVideoFeatures || n[2].size() != kTextFeatures) {
      throw ContractError("feature name tables do not match modality dimensions");
    }
    return n;
  }();
  return names;
}

}  // namespace

std::size_t feature_dim(Modality m) {
  switch (m) {
    case Modality::Audio: return kAudioFeatures;
    case Modality::Video: return kVideoFeatures;
    case Modality::Text: return kTextFeatures;
  }
  throw ContractError("unknown modality");
}

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::Audio: return "audio";
    case Modality::Video: return "video";
    case Modality::Text: return "text";
  }
  throw ContractError("unknown modality");
}

Modality parse_modality(std::string_view name) {
  for (Modality m : kModalities)
    if (modality_name(m) == name) return m;
  throw ConfigError("unknown modality '" + std::string(name) + "'");
}

std::size_t global_feature_index(Modality m, std::size_t local) {
  if (local >= feature_dim(m)) throw DimensionError("feature index out of range for " + std::string(modality_name(m)));
  std::size_t offset = 0;
  for (Modality k : kModalities) {
    if (k == m) break;
    offset += feature_dim(k);
  }
  return offset + local;
}

std::pair<Modality, std::size_t> split_global_index(std::size_t global) {
  for (Modality m : kModalities) {
    if (global < feature_dim(m)) return {m, global};
    global -= feature_dim(m);
  }
  throw DimensionError("global feature index out of range");
}

const std::string& feature_name(Modality m, std::size_t local) {
  const auto& names = all_names()[index_of(m)];
  if (local >= names.size()) throw DimensionError("feature index out of range for " + std::string(modality_name(m)));
  return names[local];
}

std::size_t find_feature(Modality m, std::string_view name) {
  const auto& names = all_names()[index_of(m)];
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("unknown " + std::string(modality_name(m)) + " feature '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace mmfuse
