#include "mmfuse/models/encoder.hpp"

#include "mmfuse/error.hpp"
#include "mmfuse/numerics/ops.hpp"

namespace mmfuse {

std::string encoder_prefix(Modality m) { return std::string(modality_name(m)) + ".enc."; }
std::string head_prefix(Modality m) { return std::string(modality_name(m)) + ".head."; }

void init_encoder(ModelParams& params, const std::string& prefix, const EncoderConfig& config, std::size_t input_dim,
                  RngStream& rng) {
  validate(config);
  std::size_t in = input_dim;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const ConvLayerSpec& l = config.layers[i];
    const std::string conv = prefix + "conv" + std::to_string(i);
    params.add(conv + ".weight", fan_in_uniform({l.channels, in, l.kernel}, in * l.kernel, rng));
    params.add(conv + ".bias", Tensor({l.channels}));
    if (config.use_batch_norm) {
      const std::string bn = prefix + "bn" + std::to_string(i);
      params.add(bn + ".gamma", Tensor({l.channels}, 1.0));
      params.add(bn + ".beta", Tensor({l.channels}));
      params.add(bn + ".running_mean", Tensor({l.channels}));
      params.add(bn + ".running_var", Tensor({l.channels}, 1.0));
    }
    in = l.channels;
  }
}

Var encoder_forward(Binder& bind, const std::string& prefix, const EncoderConfig& config, Var x, Mode mode,
                    RngStream& rng) {
  Tape& tape = bind.tape();
  Var h = x;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const std::string conv = prefix + "conv" + std::to_string(i);
    h = ops::conv1d(tape, h, bind(conv + ".weight"), bind(conv + ".bias"), config.layers[i].stride);
    if (config.use_batch_norm) {
      const std::string bn = prefix + "bn" + std::to_string(i);
      ops::BatchNormStats stats{&bind.tensor(bn + ".running_mean"), &bind.tensor(bn + ".running_var"), 0.1};
      h = ops::batch_norm(tape, h, bind(bn + ".gamma"), bind(bn + ".beta"), stats, config.bn_eps, mode);
    }
    h = ops::relu(tape, h);
    h = ops::dropout(tape, h, config.dropout, mode, rng);
  }
  return h;
}

void init_mlp_head(ModelParams& params, const std::string& prefix, const std::vector<std::size_t>& hidden,
                   std::size_t input_dim, RngStream& rng) {
  std::size_t in = input_dim;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    const std::string fc = prefix + "fc" + std::to_string(i);
    params.add(fc + ".weight", fan_in_uniform({hidden[i], in}, in, rng));
    params.add(fc + ".bias", Tensor({hidden[i]}));
    in = hidden[i];
  }
  params.add(prefix + "out.weight", fan_in_uniform({1, in}, in, rng));
  params.add(prefix + "out.bias", Tensor({1}));
}

Var mlp_head_forward(Binder& bind, const std::string& prefix, std::size_t hidden_layers, Var x, double dropout,
                     Mode mode, RngStream& rng) {
  Tape& tape = bind.tape();
  const std::size_t batch = tape.value(x).dim(0);
  Var h = x;
  for (std::size_t i = 0; i < hidden_layers; ++i) {
    const std::string fc = prefix + "fc" + std::to_string(i);
    h = ops::linear(tape, h, bind(fc + ".weight"), bind(fc + ".bias"));
    h = ops::relu(tape, h);
    h = ops::dropout(tape, h, dropout, mode, rng);
  }
  h = ops::linear(tape, h, bind(prefix + "out.weight"), bind(prefix + "out.bias"));
  return ops::reshape(tape, h, {batch});
}

Var pretrain_head_forward(Binder& bind, const std::string& prefix, const EncoderConfig& config, Var embedding,
                          Mode mode, RngStream& rng) {
  if (bind.tape().value(embedding).rank() != 3) throw DimensionError("pretrain head expects a [B, T_e, d_m] embedding");
  Var pooled = ops::max_mean_pool(bind.tape(), embedding);
  return mlp_head_forward(bind, prefix, config.head_hidden.size(), pooled, config.dropout, mode, rng);
}

UnimodalModel::UnimodalModel(Modality modality, EncoderConfig config, RngStream& init_rng)
    : modality_(modality), config_(std::move(config)) {
  RngStream enc = init_rng.derive("encoder");
  RngStream head = init_rng.derive("head");
  init_encoder(params_, encoder_prefix(modality_), config_, feature_dim(modality_), enc);
  init_mlp_head(params_, head_prefix(modality_), config_.head_hidden, 2 * config_.embedding_dim(), head);
}

UnimodalModel::UnimodalModel(Modality modality, EncoderConfig config, ModelParams params)
    : modality_(modality), config_(std::move(config)) {
  params_ = std::move(params);
}

Var UnimodalModel::embed(Tape& tape, Var x, Mode mode, RngStream& rng, ParamBinding binding) {
  Binder bind(tape, params_, binding == ParamBinding::Constant);
  return encoder_forward(bind, encoder_prefix(modality_), config_, x, mode, rng);
}

Var UnimodalModel::forward(Tape& tape, const ModelInputs& inputs, Mode mode, RngStream& rng, ParamBinding binding) {
  const Var x = inputs[index_of(modality_)];
  if (!x.valid()) throw ContractError("unimodal model: missing " + std::string(modality_name(modality_)) + " input");
  Binder bind(tape, params_, binding == ParamBinding::Constant);
  Var e = encoder_forward(bind, encoder_prefix(modality_), config_, x, mode, rng);
  return pretrain_head_forward(bind, head_prefix(modality_), config_, e, mode, rng);
}

std::array<bool, 3> UnimodalModel::uses() const {
  std::array<bool, 3> u{};
  u[index_of(modality_)] = true;
  return u;
}

util::Json UnimodalModel::config_json() const {
  return {{"kind", "unimodal"}, {"modality", modality_name(modality_)}, {"encoder", to_json(config_)}};
}

std::unique_ptr<Model> UnimodalModel::clone() const { return std::make_unique<UnimodalModel>(*this); }

}  // namespace mmfuse
