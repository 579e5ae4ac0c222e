#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

namespace mmfuse {

enum class Scale { PHQ9 = 0, GAD7 = 1, SHAPS = 2 };

inline constexpr std::array<Scale, 3> kScales{Scale::PHQ9, Scale::GAD7, Scale::SHAPS};

std::string_view scale_name(Scale s);
/// Accepts "PHQ9"/"PHQ-9", "GAD7"/"GAD-7", "SHAPS".
Scale parse_scale(std::string_view name);

struct ItemRange {
  int lo;
  int hi;
};

std::size_t item_count(Scale s);
ItemRange item_range(Scale s);

/// Binary label rule: positive iff total > threshold.
struct LabelSpec {
  Scale scale;
  int threshold;
};

LabelSpec label_spec(Scale s);

/// A repeated questionnaire item, asked again to check answer consistency.
struct DuplicateProbe {
  Scale scale;
  std::size_t item;  // zero-based item of the original scale
  int response;
};

struct ScaleResponses {
  std::array<int, 9> phq9{};
  std::array<int, 7> gad7{};
  std::array<int, 14> shaps{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  std::vector<DuplicateProbe> duplicate_probes;

  int item(Scale s, std::size_t index) const;
  int& item(Scale s, std::size_t index);
  int total(Scale s) const;
};

/// Throws ValidationError when any item or probe is outside its scale range.
void validate(const ScaleResponses& responses);

/// (depression, anxiety, anhedonia), indexed by Scale.
using Labels = std::array<int, 3>;

Labels derive_labels(const ScaleResponses& responses);

}  // namespace mmfuse
