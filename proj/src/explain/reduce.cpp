#include "mmfuse/explain/reduce.hpp"

namespace mmfuse {

std::vector<ReducedRow> reduced_feature_experiment(const std::vector<SessionRecord>& cohort,
                                                   const ExperimentSpec& spec, const GlobalImportance& importance,
                                                   std::span<const double> pcts) {
  ExperimentSpec fixed = spec;
  fixed.pipeline.hyper = resolve_hyperparams(cohort, spec);
  fixed.search_mode = SearchMode::Off;
  std::vector<ReducedRow> rows;
  for (double pct : pcts) {
    const FeatureSelection sel = select_top_features(importance, pct);
    ExperimentSpec run = fixed;
    run.pipeline.keep = sel.keep;
    ExperimentResult res = evaluate_repeated(cohort, run);
    rows.push_back({pct, sel.features.size(), res.median_test_f1, std::move(res)});
  }
  return rows;
}

}  // namespace mmfuse
