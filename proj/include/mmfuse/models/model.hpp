#pragma once

#include <array>
#include <memory>
#include <string>

#include "mmfuse/dataset/features.hpp"
#include "mmfuse/models/configs.hpp"
#include "mmfuse/models/params.hpp"
#include "mmfuse/numerics/rng.hpp"
#include "mmfuse/numerics/tape.hpp"

namespace mmfuse {

/// One batched input per modality, indexed by Modality. Entries a model does
/// not use may be left invalid.
using ModelInputs = std::array<Var, 3>;

enum class ParamBinding {
  Trainable,  // trainable entries receive gradients
  Constant,   // everything is a constant (inference, attribution)
};

/// Binary classifier producing one logit per batch row.
class Model {
 public:
  virtual ~Model() = default;

  /// Returns logits [B].
  virtual Var forward(Tape& tape, const ModelInputs& inputs, Mode mode, RngStream& rng,
                      ParamBinding binding = ParamBinding::Trainable) = 0;
  /// Which modalities forward() reads.
  virtual std::array<bool, 3> uses() const = 0;
  /// Self-describing config, including a "kind" field understood by load_model.
  virtual util::Json config_json() const = 0;
  virtual std::unique_ptr<Model> clone() const = 0;

  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

 protected:
  ModelParams params_;
};

// Parameter name prefixes.
std::string encoder_prefix(Modality m);  // "audio.enc."
std::string head_prefix(Modality m);     // "audio.head."
inline const std::string kFusionPrefix = "fusion.";

}  // namespace mmfuse
