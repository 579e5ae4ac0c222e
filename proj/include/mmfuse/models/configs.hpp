#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "mmfuse/util/json_config.hpp"

namespace mmfuse {

struct ConvLayerSpec {
  std::size_t channels;
  std::size_t kernel;
  std::size_t stride;
};

/// Shared by the three modality encoders so they emit the same T_e.
struct EncoderConfig {
  std::vector<ConvLayerSpec> layers{{16, 5, 2}, {16, 3, 2}};
  bool use_batch_norm = true;
  double dropout = 0.2;
  std::vector<std::size_t> head_hidden{16};
  double bn_eps = 1e-5;

  std::size_t embedding_dim() const { return layers.back().channels; }
  /// Composed valid-convolution length; 0 when the input is too short.
  std::size_t output_length(std::size_t frames) const;
};

struct FusionConfig {
  std::size_t layers = 1;
  std::size_t heads = 2;
  std::size_t ff_dim = 32;
  std::vector<std::size_t> head_hidden{16};
  double dropout_fc = 0.4;
  bool positional_encoding = true;
  double ln_eps = 1e-5;
};

enum class BaselineVariant { LstmConcat, BiLstmStaticAttention, LstmTensorFusion };

std::string_view baseline_variant_name(BaselineVariant v);
BaselineVariant parse_baseline_variant(std::string_view name);

struct BaselineConfig {
  BaselineVariant variant = BaselineVariant::LstmConcat;
  std::size_t hidden = 8;
  std::vector<std::size_t> head_hidden{16};
  double dropout_fc = 0.4;
  std::array<bool, 3> modalities{true, true, true};  // indexed by Modality
};

enum class Architecture { DynamicFusion, LstmConcat, BiLstmStaticAttention, LstmTensorFusion };

inline constexpr std::array<Architecture, 4> kArchitectures{
    Architecture::DynamicFusion, Architecture::LstmConcat, Architecture::BiLstmStaticAttention,
    Architecture::LstmTensorFusion};

/// "cnn_dynamic_attention", "lstm_concat", "bilstm_static_attention", "lstm_tensor_fusion"
std::string_view architecture_name(Architecture a);
Architecture parse_architecture(std::string_view name);
bool is_baseline(Architecture a);
BaselineVariant baseline_variant(Architecture a);

void validate(const EncoderConfig& c);
void validate(const FusionConfig& c, std::size_t model_dim);
void validate(const BaselineConfig& c);

util::Json to_json(const EncoderConfig& c);
util::Json to_json(const FusionConfig& c);
util::Json to_json(const BaselineConfig& c);
// Strict readers: unknown keys throw ConfigError, missing keys keep defaults.
EncoderConfig encoder_config_from_json(const util::Json& j);
FusionConfig fusion_config_from_json(const util::Json& j);
BaselineConfig baseline_config_from_json(const util::Json& j);

}  // namespace mmfuse
