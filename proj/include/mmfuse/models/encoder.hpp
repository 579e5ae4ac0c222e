#pragma once

// Convolutional modality encoder: stacked (conv1d -> batch norm -> ReLU ->
// dropout) blocks producing a [B, T_e, d_m] dynamic embedding. The pretrain
// head pools it (max || mean) and classifies.

#include <string>
#include <vector>

#include "mmfuse/models/model.hpp"

namespace mmfuse {

void init_encoder(ModelParams& params, const std::string& prefix, const EncoderConfig& config, std::size_t input_dim,
                  RngStream& rng);
Var encoder_forward(Binder& bind, const std::string& prefix, const EncoderConfig& config, Var x, Mode mode,
                    RngStream& rng);

/// Fully-connected stack: (linear -> ReLU -> dropout) per hidden size, then a
/// single-logit output layer. Input [B, F], output [B].
void init_mlp_head(ModelParams& params, const std::string& prefix, const std::vector<std::size_t>& hidden,
                   std::size_t input_dim, RngStream& rng);
Var mlp_head_forward(Binder& bind, const std::string& prefix, std::size_t hidden_layers, Var x, double dropout,
                     Mode mode, RngStream& rng);

/// Pool + head on a [B, T_e, d_m] embedding; returns logits [B].
Var pretrain_head_forward(Binder& bind, const std::string& prefix, const EncoderConfig& config, Var embedding,
                          Mode mode, RngStream& rng);

/// Encoder plus pretrain head for one modality.
class UnimodalModel : public Model {
 public:
  UnimodalModel(Modality modality, EncoderConfig config, RngStream& init_rng);
  /// Adopts existing parameters (checkpoint reload).
  UnimodalModel(Modality modality, EncoderConfig config, ModelParams params);

  Var forward(Tape& tape, const ModelInputs& inputs, Mode mode, RngStream& rng,
              ParamBinding binding = ParamBinding::Trainable) override;
  /// Encoder output only.
  Var embed(Tape& tape, Var x, Mode mode, RngStream& rng, ParamBinding binding = ParamBinding::Trainable);
  std::array<bool, 3> uses() const override;
  util::Json config_json() const override;
  std::unique_ptr<Model> clone() const override;

  Modality modality() const { return modality_; }
  const EncoderConfig& config() const { return config_; }

 private:
  Modality modality_;
  EncoderConfig config_;
};

}  // namespace mmfuse
