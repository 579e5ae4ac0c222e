#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>

namespace mmfuse {

enum class Modality { Audio = 0, Video = 1, Text = 2 };

inline constexpr std::array<Modality, 3> kModalities{Modality::Audio, Modality::Video, Modality::Text};
inline constexpr std::size_t kAudioFeatures = 123;
inline constexpr std::size_t kVideoFeatures = 22;
inline constexpr std::size_t kTextFeatures = 52;
inline constexpr std::size_t kTotalFeatures = kAudioFeatures + kVideoFeatures + kTextFeatures;
/// Frame spacing of every extracted feature sequence.
inline constexpr double kFrameSeconds = 0.1;

constexpr std::size_t index_of(Modality m) { return static_cast<std::size_t>(m); }

std::size_t feature_dim(Modality m);
std::string_view modality_name(Modality m);
/// Accepts "audio", "video", "text"; throws ConfigError otherwise.
Modality parse_modality(std::string_view name);

/// Position of a modality-local feature in the concatenated 197-feature index.
std::size_t global_feature_index(Modality m, std::size_t local);
std::pair<Modality, std::size_t> split_global_index(std::size_t global);

/// Human-readable name of a modality-local feature (MFCC, action unit, ...).
const std::string& feature_name(Modality m, std::size_t local);
/// Inverse of feature_name; throws ConfigError for unknown names.
std::size_t find_feature(Modality m, std::string_view name);

}  // namespace mmfuse
