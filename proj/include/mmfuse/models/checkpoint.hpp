#pragma once

// Checkpoints are JSON documents holding the model config and every parameter
// as (name, shape, trainable, base64 little-endian doubles); reloads are
// bit-exact.

#include <memory>
#include <string>

#include "mmfuse/models/model.hpp"

namespace mmfuse {

util::Json params_to_json(const ModelParams& params);
ModelParams params_from_json(const util::Json& json);

util::Json checkpoint_json(const Model& model);
/// Rebuilds a model from checkpoint_json output. Throws IoError for
/// malformed documents and ConfigError for unknown model kinds.
std::unique_ptr<Model> load_model(const util::Json& checkpoint);

void save_checkpoint(const std::string& path, const Model& model);
std::unique_ptr<Model> load_checkpoint(const std::string& path);

}  // namespace mmfuse
