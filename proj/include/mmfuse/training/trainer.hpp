#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "mmfuse/models/model.hpp"
#include "mmfuse/numerics/adam.hpp"
#include "mmfuse/training/examples.hpp"
#include "mmfuse/util/json_config.hpp"

namespace mmfuse {

enum class EncoderFreeze { Frozen, Finetune };

std::string_view encoder_freeze_name(EncoderFreeze f);
EncoderFreeze parse_encoder_freeze(std::string_view name);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  AdamConfig adam{};
  EncoderFreeze encoder_freeze = EncoderFreeze::Frozen;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);
util::Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const util::Json& json);

struct EpochRecord {
  std::size_t epoch;
  double train_loss;
  double val_loss;
  double val_f1;
};

struct FitResult {
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  double best_val_f1 = 0.0;
  double best_val_loss = 0.0;
  std::vector<EpochRecord> history;
};

/// Mini-batch Adam on mean BCE. After every epoch the model is scored on val;
/// the parameters of the best epoch (highest F1, then lowest loss, then
/// earliest) are restored at the end. Throws TrainingError on an empty
/// training set or a non-finite loss.
FitResult fit(Model& model, const ExampleSet& train, const ExampleSet& val, const TrainConfig& config);

/// Eval-mode logits, one per example.
std::vector<double> predict_logits(Model& model, const ExampleSet& set, std::size_t batch_size = 64);
std::vector<double> predict_probabilities(Model& model, const ExampleSet& set, std::size_t batch_size = 64);
double evaluate_f1(Model& model, const ExampleSet& set);
double mean_bce(std::span<const double> logits, std::span<const int> labels);

}  // namespace mmfuse
