#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "mmfuse/training/pipeline.hpp"
#include "mmfuse/training/search.hpp"

namespace mmfuse {

enum class SearchMode {
  Off,        // use the configured hyperparameters as given
  Once,       // search on repeat 0's split, reuse for every repeat
  PerRepeat,  // search again inside every repeat
};

std::string_view search_mode_name(SearchMode m);
SearchMode parse_search_mode(std::string_view name);

struct ExperimentSpec {
  PipelineSpec pipeline;
  SearchSpace search;
  SearchMode search_mode = SearchMode::Once;
  std::size_t repeats = 100;
  std::uint64_t base_seed = 0;
  std::size_t jobs = 1;
};

struct ExperimentResult {
  Scale scale = Scale::PHQ9;
  Architecture architecture = Architecture::DynamicFusion;
  std::vector<RepeatOutcome> repeats;  // ordered by repeat index
  double median_test_f1 = 0.0;
  std::array<std::optional<double>, 3> median_unimodal_test_f1;
  std::optional<double> best_unimodal_median;
  std::optional<double> percentage_difference;
  std::optional<SearchResult> search;
};

/// A repeat threw; the whole experiment is invalid.
class RepeatFailure : public TrainingError {
 public:
  RepeatFailure(std::size_t repeat, const std::string& what);
  std::size_t repeat() const { return repeat_; }

 private:
  std::size_t repeat_;
};

using RepeatFn = std::function<RepeatOutcome(std::size_t repeat, std::uint64_t seed)>;

/// Runs repeat i with seed base_seed + i, up to `jobs` at a time, and returns
/// the outcomes ordered by index. Throws RepeatFailure for the lowest failing
/// index after all repeats finished.
std::vector<RepeatOutcome> run_repeats(std::size_t repeats, std::uint64_t base_seed, std::size_t jobs,
                                       const RepeatFn& fn);

/// Medians and the multimodal-vs-best-unimodal percentage difference.
ExperimentResult aggregate(Scale scale, Architecture architecture, std::vector<RepeatOutcome> repeats);

/// The repeated-split protocol on a QC-passed cohort. When keep_first is
/// given it receives the trained artefacts of repeat 0.
ExperimentResult evaluate_repeated(const std::vector<SessionRecord>& cohort, const ExperimentSpec& spec,
                                   TrainedPipeline* keep_first = nullptr);

/// Hyperparameters the experiment would use for every repeat when the search
/// runs once (or is off).
HyperParams resolve_hyperparams(const std::vector<SessionRecord>& cohort, const ExperimentSpec& spec,
                                std::optional<SearchResult>* trace = nullptr);

}  // namespace mmfuse
