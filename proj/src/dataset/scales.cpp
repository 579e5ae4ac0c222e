#include "mmfuse/dataset/scales.hpp"

#include <numeric>
#include <string>

#include "mmfuse/error.hpp"

namespace mmfuse {

std::string_view scale_name(Scale s) {
  switch (s) {
    case Scale::PHQ9: return "PHQ9";
    case Scale::GAD7: return "GAD7";
    case Scale::SHAPS: return "SHAPS";
  }
  throw ContractError("unknown scale");
}

Scale parse_scale(std::string_view name) {
  if (name == "PHQ9" || name == "PHQ-9") return Scale::PHQ9;
  if (name == "GAD7" || name == "GAD-7") return Scale::GAD7;
  if (name == "SHAPS") return Scale::SHAPS;
  throw ConfigError("unknown scale '" + std::string(name) + "'");
}

std::size_t item_count(Scale s) {
  switch (s) {
    case Scale::PHQ9: return 9;
    case Scale::GAD7: return 7;
    case Scale::SHAPS: return 14;
  }
  throw ContractError("unknown scale");
}

ItemRange item_range(Scale s) { return s == Scale::SHAPS ? ItemRange{1, 4} : ItemRange{0, 3}; }

LabelSpec label_spec(Scale s) {
  switch (s) {
    case Scale::PHQ9: return {s, 9};
    case Scale::GAD7: return {s, 9};
    case Scale::SHAPS: return {s, 25};
  }
  throw ContractError("unknown scale");
}

int ScaleResponses::item(Scale s, std::size_t index) const {
  return const_cast<ScaleResponses*>(this)->item(s, index);
}

int& ScaleResponses::item(Scale s, std::size_t index) {
  if (index >= item_count(s)) throw ValidationError(std::string(scale_name(s)) + " item index out of range");
  switch (s) {
    case Scale::PHQ9: return phq9[index];
    case Scale::GAD7: return gad7[index];
    case Scale::SHAPS: return shaps[index];
  }
  throw ContractError("unknown scale");
}

int ScaleResponses::total(Scale s) const {
  int sum = 0;
  for (std::size_t i = 0; i < item_count(s); ++i) sum += item(s, i);
  return sum;
}

void validate(const ScaleResponses& r) {
  for (Scale s : kScales) {
    const ItemRange range = item_range(s);
    for (std::size_t i = 0; i < item_count(s); ++i) {
      const int v = r.item(s, i);
      if (v < range.lo || v > range.hi) {
        throw ValidationError(std::string(scale_name(s)) + " item " + std::to_string(i + 1) + " = " +
                              std::to_string(v) + " outside [" + std::to_string(range.lo) + ", " +
                              std::to_string(range.hi) + "]");
      }
    }
  }
  for (const DuplicateProbe& p : r.duplicate_probes) {
    const ItemRange range = item_range(p.scale);
    if (p.item >= item_count(p.scale)) throw ValidationError("duplicate probe refers to a missing item");
    if (p.response < range.lo || p.response > range.hi) throw ValidationError("duplicate probe response out of range");
  }
}

Labels derive_labels(const ScaleResponses& r) {
  validate(r);
  Labels labels{};
  for (Scale s : kScales) labels[static_cast<std::size_t>(s)] = r.total(s) > label_spec(s).threshold ? 1 : 0;
  return labels;
}

}  // namespace mmfuse
