#include "mmfuse/models/checkpoint.hpp"

#include "mmfuse/error.hpp"
#include "mmfuse/models/baselines.hpp"
#include "mmfuse/models/encoder.hpp"
#include "mmfuse/models/fusion.hpp"
#include "mmfuse/util/base64.hpp"

namespace mmfuse {

using util::Json;

Json params_to_json(const ModelParams& params) {
  Json out = Json::array();
  for (const auto& [name, e] : params.entries()) {
    out.push_back({{"name", name},
                   {"shape", e.value.shape()},
                   {"trainable", e.trainable},
                   {"data", util::encode_doubles(e.value.data())}});
  }
  return out;
}

ModelParams params_from_json(const Json& j) {
  ModelParams params;
  try {
    for (const Json& e : j) {
      Shape shape = e.at("shape").get<Shape>();
      std::vector<double> data = util::decode_doubles(e.at("data").get<std::string>());
      if (shape.empty() || numel(shape) != data.size()) throw IoError("parameter shape does not match its data");
      params.add(e.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)),
                 e.at("trainable").get<bool>());
    }
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed parameter list: ") + e.what());
  }
  return params;
}

Json checkpoint_json(const Model& model) {
  return {{"format", "mmfuse-checkpoint"}, {"version", 1}, {"model", model.config_json()},
          {"params", params_to_json(model.params())}};
}

std::unique_ptr<Model> load_model(const Json& j) {
  if (!j.is_object() || j.value("format", "") != "mmfuse-checkpoint") throw IoError("not an mmfuse checkpoint");
  if (j.value("version", 0) != 1) throw IoError("unsupported checkpoint version");
  ModelParams params = params_from_json(j.at("params"));
  const Json& m = j.at("model");
  const std::string kind = m.value("kind", "");
  try {
    if (kind == "unimodal") {
      return std::make_unique<UnimodalModel>(parse_modality(m.at("modality").get<std::string>()),
                                             encoder_config_from_json(m.at("encoder")), std::move(params));
    }
    if (kind == "fusion_head") {
      return std::make_unique<FusionHeadModel>(fusion_config_from_json(m.at("fusion")),
                                               m.at("embedding_dim").get<std::size_t>(), std::move(params));
    }
    if (kind == "cnn_dynamic_attention") {
      return std::make_unique<DynamicFusionModel>(encoder_config_from_json(m.at("encoder")),
                                                  fusion_config_from_json(m.at("fusion")), std::move(params));
    }
    if (kind == "lstm_concat" || kind == "bilstm_static_attention" || kind == "lstm_tensor_fusion") {
      return std::make_unique<BaselineModel>(baseline_config_from_json(m.at("baseline")), std::move(params));
    }
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed checkpoint config: ") + e.what());
  }
  throw ConfigError("unknown model kind '" + kind + "'");
}

void save_checkpoint(const std::string& path, const Model& model) {
  util::write_text_file(path, checkpoint_json(model).dump() + "\n");
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
  const std::string text = util::read_text_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  return load_model(j);
}

}  // namespace mmfuse
