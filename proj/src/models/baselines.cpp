#include "mmfuse/models/baselines.hpp"

#include "mmfuse/error.hpp"
#include "mmfuse/models/encoder.hpp"
#include "mmfuse/numerics/ops.hpp"

namespace mmfuse {

namespace {

std::string lstm_prefix(Modality m) { return "lstm." + std::string(modality_name(m)) + "."; }

void init_lstm(ModelParams& params, const std::string& prefix, std::size_t input, std::size_t hidden,
               RngStream& rng) {
  params.add(prefix + "wx", fan_in_uniform({4 * hidden, input}, input, rng));
  params.add(prefix + "wh", fan_in_uniform({4 * hidden, hidden}, hidden, rng));
  Tensor bias({4 * hidden});
  for (std::size_t j = hidden; j < 2 * hidden; ++j) bias[j] = 1.0;  // forget gate
  params.add(prefix + "bias", std::move(bias));
}

Var run_lstm(Binder& bind, const std::string& prefix, Var x, bool reverse) {
  return ops::lstm(bind.tape(), x, bind(prefix + "wx"), bind(prefix + "wh"), bind(prefix + "bias"), reverse);
}

}  // namespace

std::size_t baseline_fused_dim(const BaselineConfig& c) {
  std::size_t used = 0;
  for (bool u : c.modalities) used += u ? 1 : 0;
  switch (c.variant) {
    case BaselineVariant::LstmConcat: return used * c.hidden;
    case BaselineVariant::BiLstmStaticAttention: return used * 2 * c.hidden;
    case BaselineVariant::LstmTensorFusion: {
      std::size_t d = 1;
      for (std::size_t i = 0; i < used; ++i) d *= c.hidden + 1;
      return d;
    }
  }
  throw ConfigError("unknown baseline variant");
}

BaselineModel::BaselineModel(BaselineConfig config, RngStream& init_rng) : config_(std::move(config)) {
  validate(config_);
  const std::size_t H = config_.hidden;
  for (Modality m : kModalities) {
    if (!config_.modalities[index_of(m)]) continue;
    RngStream rng = init_rng.derive(modality_name(m));
    const std::string p = lstm_prefix(m);
    init_lstm(params_, p, feature_dim(m), H, rng);
    if (config_.variant == BaselineVariant::BiLstmStaticAttention) {
      init_lstm(params_, p + "rev.", feature_dim(m), H, rng);
      params_.add(p + "score.weight", fan_in_uniform({1, 2 * H}, 2 * H, rng));
      params_.add(p + "score.bias", Tensor({1}));
    }
  }
  RngStream rng = init_rng.derive("head");
  init_mlp_head(params_, "head.", config_.head_hidden, baseline_fused_dim(config_), rng);
}

BaselineModel::BaselineModel(BaselineConfig config, ModelParams params) : config_(std::move(config)) {
  validate(config_);
  params_ = std::move(params);
}

Var BaselineModel::forward(Tape& tape, const ModelInputs& inputs, Mode mode, RngStream& rng, ParamBinding binding) {
  Binder bind(tape, params_, binding == ParamBinding::Constant);
  std::vector<Var> parts;
  for (Modality m : kModalities) {
    if (!config_.modalities[index_of(m)]) continue;
    const Var x = inputs[index_of(m)];
    if (!x.valid()) throw ContractError("baseline: missing " + std::string(modality_name(m)) + " input");
    if (tape.value(x).rank() != 3) throw DimensionError("baseline expects [B, T, D] inputs");
    const std::size_t T = tape.value(x).dim(1);
    const std::string p = lstm_prefix(m);
    switch (config_.variant) {
      case BaselineVariant::LstmConcat:
      case BaselineVariant::LstmTensorFusion:
        parts.push_back(ops::time_step(tape, run_lstm(bind, p, x, false), T - 1));
        break;
      case BaselineVariant::BiLstmStaticAttention: {
        Var states = ops::concat_last(tape, {run_lstm(bind, p, x, false), run_lstm(bind, p + "rev.", x, true)});
        Var scores = ops::linear(tape, states, bind(p + "score.weight"), bind(p + "score.bias"));
        const std::size_t B = tape.value(x).dim(0);
        Var weights = ops::softmax(tape, ops::reshape(tape, scores, {B, T}));
        parts.push_back(ops::weighted_time_sum(tape, states, weights));
        break;
      }
    }
  }
  Var fused = config_.variant == BaselineVariant::LstmTensorFusion ? ops::outer_fusion(tape, parts)
                                                                     : ops::concat_last(tape, parts);
  return mlp_head_forward(bind, "head.", config_.head_hidden.size(), fused, config_.dropout_fc, mode, rng);
}

util::Json BaselineModel::config_json() const {
  return {{"kind", baseline_variant_name(config_.variant)}, {"baseline", to_json(config_)}};
}

std::unique_ptr<Model> BaselineModel::clone() const { return std::make_unique<BaselineModel>(*this); }

}  // namespace mmfuse
