#include "mmfuse/dataset/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "mmfuse/error.hpp"

namespace mmfuse {

std::string_view split_level_name(SplitLevel level) {
  return level == SplitLevel::Participant ? "participant" : "session";
}

SplitLevel parse_split_level(std::string_view name) {
  if (name == "participant") return SplitLevel::Participant;
  if (name == "session") return SplitLevel::Session;
  throw ConfigError("unknown split level '" + std::string(name) + "'");
}

Split split_by_units(const std::vector<std::size_t>& unit_of_session, std::size_t n_units, SplitRatios r,
                     SplitLevel level, RngStream rng) {
  if (r.train < 0 || r.val < 0 || r.test < 0 || std::abs(r.train + r.val + r.test - 1.0) > 1e-9) {
    throw SplitError("split ratios must be non-negative and sum to 1");
  }
  if (n_units < 5) throw SplitError("need at least 5 units to split, got " + std::to_string(n_units));
  std::vector<std::size_t> order(n_units);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  const auto n = static_cast<double>(n_units);
  const auto n_val = static_cast<std::size_t>(std::floor(r.val * n + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(r.test * n + 1e-9));
  // 0 train, 1 val, 2 test
  std::vector<int> part(n_units, 0);
  for (std::size_t i = 0; i < n_val; ++i) part[order[i]] = 1;
  for (std::size_t i = n_val; i < n_val + n_test; ++i) part[order[i]] = 2;
  Split split;
  split.level = level;
  for (std::size_t s = 0; s < unit_of_session.size(); ++s) {
    switch (part[unit_of_session[s]]) {
      case 0: split.train.push_back(s); break;
      case 1: split.val.push_back(s); break;
      default: split.test.push_back(s); break;
    }
  }
  return split;
}

Split split_cohort(const std::vector<SessionRecord>& sessions, SplitRatios ratios, SplitLevel level, RngStream rng) {
  std::vector<std::size_t> unit(sessions.size());
  std::size_t n_units = 0;
  if (level == SplitLevel::Session) {
    std::iota(unit.begin(), unit.end(), std::size_t{0});
    n_units = sessions.size();
  } else {
    std::unordered_map<std::string, std::size_t> ids;
    for (std::size_t s = 0; s < sessions.size(); ++s) {
      auto [it, inserted] = ids.try_emplace(sessions[s].participant_id, n_units);
      if (inserted) ++n_units;
      unit[s] = it->second;
    }
  }
  return split_by_units(unit, n_units, ratios, level, std::move(rng));
}

}  // namespace mmfuse
