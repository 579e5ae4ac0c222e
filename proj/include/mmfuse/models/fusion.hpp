#pragma once

// Dynamic-attention fusion: the three [B, T_e, d_m] embeddings are
// concatenated per frame into a [B, T_e, 3 d_m] sequence, optionally given
// sinusoidal positions, passed through post-norm transformer blocks
// (attention -> add & norm -> feedforward -> add & norm), pooled
// (max || mean) and classified.

#include <array>
#include <string>

#include "mmfuse/models/encoder.hpp"
#include "mmfuse/models/model.hpp"

namespace mmfuse {

/// PE[t, 2i] = sin(t / 10000^(2i/d)), PE[t, 2i+1] = cos(t / 10000^(2i/d)).
Tensor sinusoidal_positions(std::size_t frames, std::size_t dim);

void init_fusion(ModelParams& params, const std::string& prefix, const FusionConfig& config, std::size_t model_dim,
                 RngStream& rng);
/// Throws AlignmentError when the embeddings disagree on T_e.
Var fusion_forward(Binder& bind, const std::string& prefix, const FusionConfig& config,
                   const std::array<Var, 3>& embeddings, Mode mode, RngStream& rng);

/// Fusion stage alone; its inputs are precomputed modality embeddings.
class FusionHeadModel : public Model {
 public:
  FusionHeadModel(FusionConfig config, std::size_t embedding_dim, RngStream& init_rng);
  FusionHeadModel(FusionConfig config, std::size_t embedding_dim, ModelParams params);

  Var forward(Tape& tape, const ModelInputs& embeddings, Mode mode, RngStream& rng,
              ParamBinding binding = ParamBinding::Trainable) override;
  std::array<bool, 3> uses() const override { return {true, true, true}; }
  util::Json config_json() const override;
  std::unique_ptr<Model> clone() const override;

  const FusionConfig& config() const { return config_; }
  std::size_t embedding_dim() const { return embedding_dim_; }

 private:
  FusionConfig config_;
  std::size_t embedding_dim_;
};

/// Encoders and fusion stage end to end, reading raw feature sequences.
class DynamicFusionModel : public Model {
 public:
  /// Fresh random initialisation of every part.
  DynamicFusionModel(EncoderConfig encoder, FusionConfig fusion, RngStream& init_rng);
  /// Takes the encoders of pretrained unimodal models (heads dropped) and a
  /// trained fusion stage.
  DynamicFusionModel(const std::array<const UnimodalModel*, 3>& encoders, const FusionHeadModel& fusion);
  DynamicFusionModel(EncoderConfig encoder, FusionConfig fusion, ModelParams params);

  Var forward(Tape& tape, const ModelInputs& inputs, Mode mode, RngStream& rng,
              ParamBinding binding = ParamBinding::Trainable) override;
  /// Encoder outputs only, [B, T_e, d_m] per modality.
  std::array<Var, 3> embed(Tape& tape, const ModelInputs& inputs, Mode mode, RngStream& rng,
                           ParamBinding binding = ParamBinding::Trainable);
  std::array<bool, 3> uses() const override { return {true, true, true}; }
  util::Json config_json() const override;
  std::unique_ptr<Model> clone() const override;

  const EncoderConfig& encoder_config() const { return encoder_; }
  const FusionConfig& fusion_config() const { return fusion_; }

 private:
  EncoderConfig encoder_;
  FusionConfig fusion_;
};

}  // namespace mmfuse
