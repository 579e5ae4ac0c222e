#pragma once

// Static-embedding baselines. Each enabled modality is reduced to one vector
// by an LSTM before any cross-modal interaction:
//   lstm_concat              final hidden states, concatenated
//   bilstm_static_attention  forward/backward states pooled by a learned
//                            softmax over time, concatenated
//   lstm_tensor_fusion       final hidden states, each extended by a 1,
//                            combined by a flattened outer product

#include "mmfuse/models/model.hpp"

namespace mmfuse {

/// Width of the fused static vector fed to the head.
std::size_t baseline_fused_dim(const BaselineConfig& config);

class BaselineModel : public Model {
 public:
  BaselineModel(BaselineConfig config, RngStream& init_rng);
  BaselineModel(BaselineConfig config, ModelParams params);

  Var forward(Tape& tape, const ModelInputs& inputs, Mode mode, RngStream& rng,
              ParamBinding binding = ParamBinding::Trainable) override;
  std::array<bool, 3> uses() const override { return config_.modalities; }
  util::Json config_json() const override;
  std::unique_ptr<Model> clone() const override;

  const BaselineConfig& config() const { return config_; }

 private:
  BaselineConfig config_;
};

}  // namespace mmfuse
