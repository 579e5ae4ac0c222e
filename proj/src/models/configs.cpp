#include "mmfuse/models/configs.hpp"

#include <string>

#include "mmfuse/dataset/features.hpp"
#include "mmfuse/error.hpp"

namespace mmfuse {

std::size_t EncoderConfig::output_length(std::size_t frames) const {
  std::size_t t = frames;
  for (const ConvLayerSpec& l : layers) {
    if (t < l.kernel) return 0;
    t = (t - l.kernel) / l.stride + 1;
  }
  return t;
}

std::string_view baseline_variant_name(BaselineVariant v) {
  switch (v) {
    case BaselineVariant::LstmConcat: return "lstm_concat";
    case BaselineVariant::BiLstmStaticAttention: return "bilstm_static_attention";
    case BaselineVariant::LstmTensorFusion: return "lstm_tensor_fusion";
  }
  throw ContractError("unknown baseline variant");
}

BaselineVariant parse_baseline_variant(std::string_view name) {
  if (name == "lstm_concat") return BaselineVariant::LstmConcat;
  if (name == "bilstm_static_attention") return BaselineVariant::BiLstmStaticAttention;
  if (name == "lstm_tensor_fusion") return BaselineVariant::LstmTensorFusion;
  throw ConfigError("unknown baseline variant '" + std::string(name) + "'");
}

std::string_view architecture_name(Architecture a) {
  switch (a) {
    case Architecture::DynamicFusion: return "cnn_dynamic_attention";
    case Architecture::LstmConcat: return "lstm_concat";
    case Architecture::BiLstmStaticAttention: return "bilstm_static_attention";
    case Architecture::LstmTensorFusion: return "lstm_tensor_fusion";
  }
  throw ContractError("unknown architecture");
}

Architecture parse_architecture(std::string_view name) {
  for (Architecture a : kArchitectures) {
    if (architecture_name(a) == name) return a;
  }
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

bool is_baseline(Architecture a) { return a != Architecture::DynamicFusion; }

BaselineVariant baseline_variant(Architecture a) {
  switch (a) {
    case Architecture::LstmConcat: return BaselineVariant::LstmConcat;
    case Architecture::BiLstmStaticAttention: return BaselineVariant::BiLstmStaticAttention;
    case Architecture::LstmTensorFusion: return BaselineVariant::LstmTensorFusion;
    case Architecture::DynamicFusion: break;
  }
  throw ContractError("cnn_dynamic_attention is not a baseline");
}

namespace {

void check_dropout(double p, const char* what) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1)");
}

void check_sizes(const std::vector<std::size_t>& sizes, const char* what) {
  for (std::size_t s : sizes) {
    if (s == 0) throw ConfigError(std::string(what) + " entries must be positive");
  }
}

}  // namespace

void validate(const EncoderConfig& c) {
  if (c.layers.empty()) throw ConfigError("encoder: at least one convolution layer is required");
  for (const ConvLayerSpec& l : c.layers) {
    if (l.channels == 0 || l.kernel == 0 || l.stride == 0) {
      throw ConfigError("encoder: channels, kernel and stride must be positive");
    }
  }
  check_dropout(c.dropout, "encoder.dropout");
  check_sizes(c.head_hidden, "encoder.head_hidden");
  if (!(c.bn_eps > 0.0)) throw ConfigError("encoder.bn_eps must be positive");
}

void validate(const FusionConfig& c, std::size_t model_dim) {
  if (c.heads == 0 || model_dim % c.heads != 0) {
    throw ConfigError("fusion: model dim " + std::to_string(model_dim) + " is not divisible by " +
                      std::to_string(c.heads) + " heads");
  }
  if (c.ff_dim == 0) throw ConfigError("fusion.ff_dim must be positive");
  check_sizes(c.head_hidden, "fusion.head_hidden");
  check_dropout(c.dropout_fc, "fusion.dropout_fc");
  if (!(c.ln_eps > 0.0)) throw ConfigError("fusion.ln_eps must be positive");
}

void validate(const BaselineConfig& c) {
  if (c.hidden == 0) throw ConfigError("baseline.hidden must be positive");
  check_sizes(c.head_hidden, "baseline.head_hidden");
  check_dropout(c.dropout_fc, "baseline.dropout_fc");
  if (!c.modalities[0] && !c.modalities[1] && !c.modalities[2]) {
    throw ConfigError("baseline: at least one modality must be enabled");
  }
}

util::Json to_json(const EncoderConfig& c) {
  util::Json layers = util::Json::array();
  for (const ConvLayerSpec& l : c.layers) {
    layers.push_back({{"channels", l.channels}, {"kernel", l.kernel}, {"stride", l.stride}});
  }
  return {{"layers", layers},
          {"use_batch_norm", c.use_batch_norm},
          {"dropout", c.dropout},
          {"head_hidden", c.head_hidden},
          {"bn_eps", c.bn_eps}};
}

util::Json to_json(const FusionConfig& c) {
  return {{"layers", c.layers},         {"heads", c.heads},
          {"ff_dim", c.ff_dim},         {"head_hidden", c.head_hidden},
          {"dropout_fc", c.dropout_fc}, {"positional_encoding", c.positional_encoding},
          {"ln_eps", c.ln_eps}};
}

util::Json to_json(const BaselineConfig& c) {
  util::Json mods = util::Json::array();
  for (Modality m : kModalities) {
    if (c.modalities[index_of(m)]) mods.push_back(modality_name(m));
  }
  return {{"variant", baseline_variant_name(c.variant)},
          {"hidden", c.hidden},
          {"head_hidden", c.head_hidden},
          {"dropout_fc", c.dropout_fc},
          {"modalities", mods}};
}

EncoderConfig encoder_config_from_json(const util::Json& j) {
  const char* ctx = "encoder";
  util::require_object(j, ctx);
  util::reject_unknown_keys(j, {"layers", "use_batch_norm", "dropout", "head_hidden", "bn_eps"}, ctx);
  EncoderConfig c;
  if (auto it = j.find("layers"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("encoder.layers must be an array");
    c.layers.clear();
    for (const util::Json& l : *it) {
      util::require_object(l, "encoder.layers[]");
      util::reject_unknown_keys(l, {"channels", "kernel", "stride"}, "encoder.layers[]");
      c.layers.push_back({util::read_required<std::size_t>(l, "channels", "encoder.layers[]"),
                          util::read_required<std::size_t>(l, "kernel", "encoder.layers[]"),
                          util::read_required<std::size_t>(l, "stride", "encoder.layers[]")});
    }
  }
  util::read_optional(j, "use_batch_norm", c.use_batch_norm, ctx);
  util::read_optional(j, "dropout", c.dropout, ctx);
  util::read_optional(j, "head_hidden", c.head_hidden, ctx);
  util::read_optional(j, "bn_eps", c.bn_eps, ctx);
  validate(c);
  return c;
}

FusionConfig fusion_config_from_json(const util::Json& j) {
  const char* ctx = "fusion";
  util::require_object(j, ctx);
  util::reject_unknown_keys(j, {"layers", "heads", "ff_dim", "head_hidden", "dropout_fc", "positional_encoding", "ln_eps"},
                            ctx);
  FusionConfig c;
  util::read_optional(j, "layers", c.layers, ctx);
  util::read_optional(j, "heads", c.heads, ctx);
  util::read_optional(j, "ff_dim", c.ff_dim, ctx);
  util::read_optional(j, "head_hidden", c.head_hidden, ctx);
  util::read_optional(j, "dropout_fc", c.dropout_fc, ctx);
  util::read_optional(j, "positional_encoding", c.positional_encoding, ctx);
  util::read_optional(j, "ln_eps", c.ln_eps, ctx);
  return c;
}

BaselineConfig baseline_config_from_json(const util::Json& j) {
  const char* ctx = "baseline";
  util::require_object(j, ctx);
  util::reject_unknown_keys(j, {"variant", "hidden", "head_hidden", "dropout_fc", "modalities"}, ctx);
  BaselineConfig c;
  if (j.contains("variant")) c.variant = parse_baseline_variant(util::read_required<std::string>(j, "variant", ctx));
  util::read_optional(j, "hidden", c.hidden, ctx);
  util::read_optional(j, "head_hidden", c.head_hidden, ctx);
  util::read_optional(j, "dropout_fc", c.dropout_fc, ctx);
  if (j.contains("modalities")) {
    c.modalities = {false, false, false};
    for (const auto& name : util::read_required<std::vector<std::string>>(j, "modalities", ctx)) {
      c.modalities[index_of(parse_modality(name))] = true;
    }
  }
  validate(c);
  return c;
}

}  // namespace mmfuse
