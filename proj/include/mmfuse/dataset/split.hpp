#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "mmfuse/dataset/session.hpp"
#include "mmfuse/numerics/rng.hpp"

namespace mmfuse {

enum class SplitLevel { Participant, Session };

std::string_view split_level_name(SplitLevel level);
SplitLevel parse_split_level(std::string_view name);

/// Session indices (into the list that was split), each partition sorted.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  SplitLevel level = SplitLevel::Participant;
};

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

/// Shuffles the units (participants or sessions), gives val and test
/// floor(ratio * units) each and the rest to train. Throws SplitError with
/// fewer than five units or ratios that do not sum to one.
Split split_cohort(const std::vector<SessionRecord>& sessions, SplitRatios ratios, SplitLevel level, RngStream rng);

/// Same rule on bare participant ids, one entry per session.
Split split_by_units(const std::vector<std::size_t>& unit_of_session, std::size_t n_units, SplitRatios ratios,
                     SplitLevel level, RngStream rng);

}  // namespace mmfuse
