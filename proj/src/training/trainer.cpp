#include "mmfuse/training/trainer.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "mmfuse/error.hpp"
#include "mmfuse/numerics/ops.hpp"
#include "mmfuse/training/metrics.hpp"

namespace mmfuse {

std::string_view encoder_freeze_name(EncoderFreeze f) { return f == EncoderFreeze::Frozen ? "frozen" : "finetune"; }

EncoderFreeze parse_encoder_freeze(std::string_view name) {
  if (name == "frozen") return EncoderFreeze::Frozen;
  if (name == "finetune") return EncoderFreeze::Finetune;
  throw ConfigError("unknown encoder_freeze '" + std::string(name) + "'");
}

void validate(const TrainConfig& c) {
  if (c.batch_size == 0) throw ConfigError("train.batch_size must be at least 1");
  validate(c.adam);
}

util::Json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.adam.lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"eps", c.adam.eps},
          {"weight_decay", c.adam.weight_decay},
          {"encoder_freeze", encoder_freeze_name(c.encoder_freeze)},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const util::Json& j) {
  const char* ctx = "train";
  util::require_object(j, ctx);
  util::reject_unknown_keys(
      j, {"epochs", "batch_size", "lr", "beta1", "beta2", "eps", "weight_decay", "encoder_freeze", "seed"}, ctx);
  TrainConfig c;
  util::read_optional(j, "epochs", c.epochs, ctx);
  util::read_optional(j, "batch_size", c.batch_size, ctx);
  util::read_optional(j, "lr", c.adam.lr, ctx);
  util::read_optional(j, "beta1", c.adam.beta1, ctx);
  util::read_optional(j, "beta2", c.adam.beta2, ctx);
  util::read_optional(j, "eps", c.adam.eps, ctx);
  util::read_optional(j, "weight_decay", c.adam.weight_decay, ctx);
  util::read_optional(j, "seed", c.seed, ctx);
  if (j.contains("encoder_freeze")) {
    c.encoder_freeze = parse_encoder_freeze(util::read_required<std::string>(j, "encoder_freeze", ctx));
  }
  validate(c);
  return c;
}

namespace {

ModelInputs bind_inputs(Tape& tape, std::array<Tensor, 3>& batch) {
  ModelInputs in;
  for (std::size_t m = 0; m < 3; ++m) {
    if (!batch[m].empty()) in[m] = tape.constant(std::move(batch[m]));
  }
  return in;
}

}  // namespace

double mean_bce(std::span<const double> logits, std::span<const int> labels) {
  if (logits.empty() || logits.size() != labels.size()) throw MetricError("loss inputs empty or mismatched");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) total += bce_loss(logits[i], labels[i]);
  return total / static_cast<double>(logits.size());
}

std::vector<double> predict_logits(Model& model, const ExampleSet& set, std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(set.size());
  RngStream unused(0);
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    rows.resize(std::min(batch_size, set.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    auto batch = stack_batch(set, rows, model.uses());
    Tape tape;
    const Var logits = model.forward(tape, bind_inputs(tape, batch), Mode::Eval, unused, ParamBinding::Constant);
    for (double v : tape.value(logits).data()) out.push_back(v);
  }
  return out;
}

std::vector<double> predict_probabilities(Model& model, const ExampleSet& set, std::size_t batch_size) {
  std::vector<double> p = predict_logits(model, set, batch_size);
  for (double& v : p) v = stable_sigmoid(v);
  return p;
}

double evaluate_f1(Model& model, const ExampleSet& set) {
  return f1_score(predict_probabilities(model, set), set.labels);
}

FitResult fit(Model& model, const ExampleSet& train, const ExampleSet& val, const TrainConfig& config) {
  validate(config);
  if (train.size() == 0) throw TrainingError("empty training split");
  if (val.size() == 0) throw TrainingError("empty validation split");
  FitResult result;
  if (config.epochs == 0) return result;

  const RngStream root(config.seed);
  std::vector<Tensor*> trainable = model.params().trainable_tensors();
  AdamState state;
  ModelParams best;
  bool have_best = false;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    RngStream shuffle = root.derive("shuffle").derive(static_cast<std::uint64_t>(epoch));
    shuffle.shuffle(std::span<std::size_t>(order));
    const RngStream dropout_root = root.derive("dropout").derive(static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    for (std::size_t start = 0, batch_index = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      std::span<const std::size_t> rows(order.data() + start, n);
      auto batch = stack_batch(train, rows, model.uses());
      std::vector<double> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = train.labels[rows[i]];

      model.params().zero_grad();
      Tape tape;
      RngStream dropout = dropout_root.derive(static_cast<std::uint64_t>(batch_index));
      const Var logits = model.forward(tape, bind_inputs(tape, batch), Mode::Train, dropout);
      const Var loss = ops::bce_with_logits(tape, logits, labels);
      const double value = tape.value(loss)[0];
      if (!std::isfinite(value)) throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
      loss_sum += value * static_cast<double>(n);
      tape.backward(loss);
      adam_step(trainable, state, config.adam);
    }

    const std::vector<double> val_logits = predict_logits(model, val);
    std::vector<double> val_prob(val_logits);
    for (double& v : val_prob) v = stable_sigmoid(v);
    const EpochRecord rec{epoch, loss_sum / static_cast<double>(train.size()), mean_bce(val_logits, val.labels),
                          f1_score(val_prob, val.labels)};
    result.history.push_back(rec);
    const bool better = !have_best || rec.val_f1 > result.best_val_f1 ||
                        (rec.val_f1 == result.best_val_f1 && rec.val_loss < result.best_val_loss);
    if (better) {
      have_best = true;
      result.best_epoch = epoch;
      result.best_val_f1 = rec.val_f1;
      result.best_val_loss = rec.val_loss;
      best = ModelParams();
      best.merge(model.params());
    }
  }
  // Restore values in place so tensor addresses held by callers stay valid.
  for (const auto& [name, e] : best.entries()) {
    Tensor& dst = model.params().at(name);
    std::copy(e.value.data().begin(), e.value.data().end(), dst.data().begin());
    dst.drop_grad();
  }
  return result;
}

}  // namespace mmfuse
