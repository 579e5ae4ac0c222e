#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "mmfuse/dataset/split.hpp"
#include "mmfuse/models/model.hpp"
#include "mmfuse/training/examples.hpp"
#include "mmfuse/training/search.hpp"
#include "mmfuse/training/trainer.hpp"

namespace mmfuse {

/// One split -> train -> test run for a (scale, architecture) pair.
struct PipelineSpec {
  Architecture architecture = Architecture::DynamicFusion;
  Scale scale = Scale::PHQ9;
  HyperParams hyper;
  TrainConfig train;
  SplitRatios ratios;
  SplitLevel level = SplitLevel::Participant;
  /// Also train (baselines) or report (pretrained encoders) single-modality models.
  bool unimodal = true;
  /// Feature selection; excluded features are filled with the training-split mean.
  std::optional<std::array<std::vector<char>, 3>> keep;
};

struct RepeatOutcome {
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  double train_f1 = 0.0;
  double val_f1 = 0.0;
  double test_f1 = 0.0;
  std::array<std::optional<double>, 3> unimodal_test_f1;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  util::Json config;
};

/// Trained artefacts of one run, for checkpointing and attribution.
struct TrainedPipeline {
  Split split;
  std::unique_ptr<Model> model;
  std::array<std::unique_ptr<Model>, 3> unimodal;
  std::optional<FeatureMask> mask;
};

/// The split uses RngStream(seed); every other stream is derived from it.
/// The dynamic model pretrains one encoder+head per modality (these are the
/// unimodal models), then trains the fusion stage on frozen embeddings or
/// fine-tunes end to end.
RepeatOutcome run_pipeline(const std::vector<SessionRecord>& cohort, const PipelineSpec& spec,
                           const HyperParams& hyper, std::size_t repeat, std::uint64_t seed,
                           TrainedPipeline* keep = nullptr);

/// Eval-mode encoder outputs, one [T_e, d_m] tensor per example and modality.
OwnedExamples embed_examples(const std::array<Model*, 3>& unimodal, const ExampleSet& set,
                             std::size_t batch_size = 64);

}  // namespace mmfuse
