#include "mmfuse/training/experiment.hpp"

#include <exception>
#include <string>

#include "mmfuse/error.hpp"
#include "mmfuse/training/metrics.hpp"

namespace mmfuse {

std::string_view search_mode_name(SearchMode m) {
  switch (m) {
    case SearchMode::Off: return "off";
    case SearchMode::Once: return "once";
    case SearchMode::PerRepeat: return "per_repeat";
  }
  throw ContractError("unknown search mode");
}

SearchMode parse_search_mode(std::string_view name) {
  if (name == "off") return SearchMode::Off;
  if (name == "once") return SearchMode::Once;
  if (name == "per_repeat") return SearchMode::PerRepeat;
  throw ConfigError("unknown search_mode '" + std::string(name) + "'");
}

RepeatFailure::RepeatFailure(std::size_t repeat, const std::string& what)
    : TrainingError("repeat " + std::to_string(repeat) + " failed: " + what), repeat_(repeat) {}

std::vector<RepeatOutcome> run_repeats(std::size_t repeats, std::uint64_t base_seed, std::size_t jobs,
                                       const RepeatFn& fn) {
  std::vector<RepeatOutcome> out(repeats);
  std::vector<std::string> errors(repeats);
  std::vector<char> failed(repeats, 0);
  const int threads = static_cast<int>(std::max<std::size_t>(1, jobs));
  const auto n = static_cast<long long>(repeats);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
  for (long long i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    try {
      out[r] = fn(r, base_seed + r);
      out[r].repeat = r;
      out[r].seed = base_seed + r;
    } catch (const std::exception& e) {
      failed[r] = 1;
      errors[r] = e.what();
    }
  }
  for (std::size_t r = 0; r < repeats; ++r) {
    if (failed[r]) throw RepeatFailure(r, errors[r]);
  }
  return out;
}

ExperimentResult aggregate(Scale scale, Architecture architecture, std::vector<RepeatOutcome> repeats) {
  ExperimentResult res;
  res.scale = scale;
  res.architecture = architecture;
  std::vector<double> test;
  std::array<std::vector<double>, 3> uni;
  for (const RepeatOutcome& r : repeats) {
    test.push_back(r.test_f1);
    for (std::size_t m = 0; m < 3; ++m) {
      if (r.unimodal_test_f1[m]) uni[m].push_back(*r.unimodal_test_f1[m]);
    }
  }
  res.median_test_f1 = median(test);
  for (std::size_t m = 0; m < 3; ++m) {
    if (uni[m].size() == repeats.size() && !uni[m].empty()) {
      res.median_unimodal_test_f1[m] = median(uni[m]);
      if (!res.best_unimodal_median || *res.median_unimodal_test_f1[m] > *res.best_unimodal_median) {
        res.best_unimodal_median = res.median_unimodal_test_f1[m];
      }
    }
  }
  if (res.best_unimodal_median && *res.best_unimodal_median > 0.0) {
    res.percentage_difference = percentage_difference(res.median_test_f1, *res.best_unimodal_median);
  }
  res.repeats = std::move(repeats);
  return res;
}

HyperParams resolve_hyperparams(const std::vector<SessionRecord>& cohort, const ExperimentSpec& spec,
                                std::optional<SearchResult>* trace) {
  if (spec.search_mode != SearchMode::Once) return spec.pipeline.hyper;
  PipelineSpec probe = spec.pipeline;
  probe.unimodal = false;
  const SearchObjective objective = [&](const HyperParams& h) {
    return run_pipeline(cohort, probe, h, 0, spec.base_seed).val_f1;
  };
  SearchResult result =
      random_search(spec.search, spec.pipeline.hyper, objective, RngStream(spec.base_seed).derive("search"));
  HyperParams best = result.best;
  if (trace) *trace = std::move(result);
  return best;
}

ExperimentResult evaluate_repeated(const std::vector<SessionRecord>& cohort, const ExperimentSpec& spec,
                                   TrainedPipeline* keep_first) {
  if (spec.repeats == 0) throw ConfigError("repeats must be at least 1");
  std::optional<SearchResult> trace;
  const HyperParams shared = resolve_hyperparams(cohort, spec, &trace);
  const RepeatFn fn = [&](std::size_t repeat, std::uint64_t seed) {
    HyperParams hyper = shared;
    if (spec.search_mode == SearchMode::PerRepeat) {
      PipelineSpec probe = spec.pipeline;
      probe.unimodal = false;
      const SearchObjective objective = [&](const HyperParams& h) {
        return run_pipeline(cohort, probe, h, repeat, seed).val_f1;
      };
      hyper = random_search(spec.search, spec.pipeline.hyper, objective, RngStream(seed).derive("search")).best;
    }
    return run_pipeline(cohort, spec.pipeline, hyper, repeat, seed, repeat == 0 ? keep_first : nullptr);
  };
  ExperimentResult res =
      aggregate(spec.pipeline.scale, spec.pipeline.architecture, run_repeats(spec.repeats, spec.base_seed, spec.jobs, fn));
  res.search = std::move(trace);
  return res;
}

}  // namespace mmfuse
