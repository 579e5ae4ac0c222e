#include "mmfuse/models/fusion.hpp"

#include <cmath>

#include "mmfuse/error.hpp"
#include "mmfuse/numerics/ops.hpp"

namespace mmfuse {

Tensor sinusoidal_positions(std::size_t frames, std::size_t dim) {
  Tensor pe({frames, dim});
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(dim));
      const double angle = static_cast<double>(t) * rate;
      pe.at(t, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

void init_fusion(ModelParams& params, const std::string& prefix, const FusionConfig& config, std::size_t d,
                 RngStream& rng) {
  validate(config, d);
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string blk = prefix + "block" + std::to_string(l) + ".";
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
      params.add(blk + "attn." + w, fan_in_uniform({d, d}, d, rng));
      params.add(blk + "attn.b" + std::string(w + 1), Tensor({d}));
    }
    params.add(blk + "ln1.gamma", Tensor({d}, 1.0));
    params.add(blk + "ln1.beta", Tensor({d}));
    params.add(blk + "ff1.weight", fan_in_uniform({config.ff_dim, d}, d, rng));
    params.add(blk + "ff1.bias", Tensor({config.ff_dim}));
    params.add(blk + "ff2.weight", fan_in_uniform({d, config.ff_dim}, config.ff_dim, rng));
    params.add(blk + "ff2.bias", Tensor({d}));
    params.add(blk + "ln2.gamma", Tensor({d}, 1.0));
    params.add(blk + "ln2.beta", Tensor({d}));
  }
  init_mlp_head(params, prefix + "head.", config.head_hidden, 2 * d, rng);
}

Var fusion_forward(Binder& bind, const std::string& prefix, const FusionConfig& config,
                   const std::array<Var, 3>& embeddings, Mode mode, RngStream& rng) {
  Tape& tape = bind.tape();
  for (const Var& e : embeddings) {
    if (!e.valid() || tape.value(e).rank() != 3) throw DimensionError("fusion expects three [B, T_e, d_m] embeddings");
  }
  const std::size_t te = tape.value(embeddings[0]).dim(1);
  for (const Var& e : embeddings) {
    if (tape.value(e).dim(1) != te) throw AlignmentError("fusion: modality embeddings have different lengths T_e");
  }
  Var x = ops::concat_last(tape, {embeddings[0], embeddings[1], embeddings[2]});
  const std::size_t d = tape.value(x).dim(2);
  if (config.positional_encoding) x = ops::add(tape, x, tape.constant(sinusoidal_positions(te, d)));
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string blk = prefix + "block" + std::to_string(l) + ".";
    const ops::AttentionVars attn{bind(blk + "attn.wq"), bind(blk + "attn.bq"), bind(blk + "attn.wk"),
                                  bind(blk + "attn.bk"), bind(blk + "attn.wv"), bind(blk + "attn.bv"),
                                  bind(blk + "attn.wo"), bind(blk + "attn.bo")};
    Var a = ops::multi_head_self_attention(tape, x, attn, config.heads);
    x = ops::layer_norm(tape, ops::add(tape, x, a), bind(blk + "ln1.gamma"), bind(blk + "ln1.beta"), config.ln_eps);
    Var f = ops::relu(tape, ops::linear(tape, x, bind(blk + "ff1.weight"), bind(blk + "ff1.bias")));
    f = ops::linear(tape, f, bind(blk + "ff2.weight"), bind(blk + "ff2.bias"));
    x = ops::layer_norm(tape, ops::add(tape, x, f), bind(blk + "ln2.gamma"), bind(blk + "ln2.beta"), config.ln_eps);
  }
  Var pooled = ops::max_mean_pool(tape, x);
  return mlp_head_forward(bind, prefix + "head.", config.head_hidden.size(), pooled, config.dropout_fc, mode, rng);
}

FusionHeadModel::FusionHeadModel(FusionConfig config, std::size_t embedding_dim, RngStream& init_rng)
    : config_(std::move(config)), embedding_dim_(embedding_dim) {
  RngStream rng = init_rng.derive("fusion");
  init_fusion(params_, kFusionPrefix, config_, 3 * embedding_dim_, rng);
}

FusionHeadModel::FusionHeadModel(FusionConfig config, std::size_t embedding_dim, ModelParams params)
    : config_(std::move(config)), embedding_dim_(embedding_dim) {
  validate(config_, 3 * embedding_dim_);
  params_ = std::move(params);
}

Var FusionHeadModel::forward(Tape& tape, const ModelInputs& embeddings, Mode mode, RngStream& rng,
                             ParamBinding binding) {
  Binder bind(tape, params_, binding == ParamBinding::Constant);
  return fusion_forward(bind, kFusionPrefix, config_, embeddings, mode, rng);
}

util::Json FusionHeadModel::config_json() const {
  return {{"kind", "fusion_head"}, {"embedding_dim", embedding_dim_}, {"fusion", to_json(config_)}};
}

std::unique_ptr<Model> FusionHeadModel::clone() const { return std::make_unique<FusionHeadModel>(*this); }

DynamicFusionModel::DynamicFusionModel(EncoderConfig encoder, FusionConfig fusion, RngStream& init_rng)
    : encoder_(std::move(encoder)), fusion_(std::move(fusion)) {
  validate(encoder_);
  validate(fusion_, 3 * encoder_.embedding_dim());
  for (Modality m : kModalities) {
    RngStream rng = init_rng.derive(modality_name(m));
    init_encoder(params_, encoder_prefix(m), encoder_, feature_dim(m), rng);
  }
  RngStream rng = init_rng.derive("fusion");
  init_fusion(params_, kFusionPrefix, fusion_, 3 * encoder_.embedding_dim(), rng);
}

DynamicFusionModel::DynamicFusionModel(const std::array<const UnimodalModel*, 3>& encoders,
                                       const FusionHeadModel& fusion)
    : encoder_(encoders[0]->config()), fusion_(fusion.config()) {
  for (Modality m : kModalities) {
    const UnimodalModel& u = *encoders[index_of(m)];
    if (u.modality() != m) throw ContractError("encoders must be ordered audio, video, text");
    if (to_json(u.config()) != to_json(encoder_)) throw ConfigError("modality encoders must share one config");
    params_.merge(u.params(), encoder_prefix(m));
  }
  if (fusion.embedding_dim() != encoder_.embedding_dim()) throw DimensionError("fusion stage embedding dim mismatch");
  params_.merge(fusion.params(), kFusionPrefix);
}

DynamicFusionModel::DynamicFusionModel(EncoderConfig encoder, FusionConfig fusion, ModelParams params)
    : encoder_(std::move(encoder)), fusion_(std::move(fusion)) {
  validate(encoder_);
  validate(fusion_, 3 * encoder_.embedding_dim());
  params_ = std::move(params);
}

std::array<Var, 3> DynamicFusionModel::embed(Tape& tape, const ModelInputs& inputs, Mode mode, RngStream& rng,
                                             ParamBinding binding) {
  Binder bind(tape, params_, binding == ParamBinding::Constant);
  std::array<Var, 3> e;
  for (Modality m : kModalities) {
    if (!inputs[index_of(m)].valid()) throw ContractError("dynamic fusion model needs all three modalities");
    e[index_of(m)] = encoder_forward(bind, encoder_prefix(m), encoder_, inputs[index_of(m)], mode, rng);
  }
  return e;
}

Var DynamicFusionModel::forward(Tape& tape, const ModelInputs& inputs, Mode mode, RngStream& rng,
                                ParamBinding binding) {
  Binder bind(tape, params_, binding == ParamBinding::Constant);
  std::array<Var, 3> e;
  for (Modality m : kModalities) {
    if (!inputs[index_of(m)].valid()) throw ContractError("dynamic fusion model needs all three modalities");
    e[index_of(m)] = encoder_forward(bind, encoder_prefix(m), encoder_, inputs[index_of(m)], mode, rng);
  }
  return fusion_forward(bind, kFusionPrefix, fusion_, e, mode, rng);
}

util::Json DynamicFusionModel::config_json() const {
  return {{"kind", "cnn_dynamic_attention"}, {"encoder", to_json(encoder_)}, {"fusion", to_json(fusion_)}};
}

std::unique_ptr<Model> DynamicFusionModel::clone() const { return std::make_unique<DynamicFusionModel>(*this); }

}  // namespace mmfuse
