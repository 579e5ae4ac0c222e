#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mmfuse/models/configs.hpp"
#include "mmfuse/numerics/adam.hpp"
#include "mmfuse/numerics/rng.hpp"
#include "mmfuse/util/json_config.hpp"

namespace mmfuse {

/// Everything the random search may change for one architecture instance.
struct HyperParams {
  EncoderConfig encoder;
  FusionConfig fusion;
  BaselineConfig baseline;
  AdamConfig adam;
};

util::Json to_json(const HyperParams& h);

/// Discrete choices are drawn uniformly from their lists; the learning rate is
/// log-uniform on [lr_min, lr_max].
struct SearchSpace {
  std::vector<std::size_t> cnn_layers{1, 2};
  std::vector<std::size_t> cnn_channels{8, 16};
  std::vector<std::size_t> kernel_sizes{3, 5};
  std::vector<std::size_t> fc_layers{0, 1};
  std::vector<std::size_t> fc_sizes{8, 16};
  std::vector<std::size_t> transformer_layers{1, 2};
  std::vector<std::size_t> transformer_ff{16, 32};
  std::vector<std::size_t> attention_heads{1, 2};
  std::vector<std::size_t> lstm_hidden{4, 8};
  double lr_min = 1e-3;
  double lr_max = 1e-2;
  std::vector<double> weight_decay{0.0, 1e-4};
  std::size_t budget = 20;
};

void validate(const SearchSpace& space);
util::Json to_json(const SearchSpace& space);
SearchSpace search_space_from_json(const util::Json& json);

/// Draws one configuration; fields not covered by the space keep base's values.
/// Convolution strides stay those of base's first layer.
HyperParams sample_hyperparams(const SearchSpace& space, const HyperParams& base, RngStream& rng);

struct SearchTrial {
  std::size_t index;
  HyperParams params;
  std::optional<double> score;  // unset when the objective threw
  std::string error;
};

struct SearchResult {
  HyperParams best;
  double best_score = 0.0;
  std::size_t best_index = 0;
  std::vector<SearchTrial> trace;
};

using SearchObjective = std::function<double(const HyperParams&)>;

/// Evaluates `budget` sampled configs and keeps the highest score, earliest
/// sample first on ties. Objective failures are recorded and skipped; if all
/// fail a TrainingError is thrown.
SearchResult random_search(const SearchSpace& space, const HyperParams& base, const SearchObjective& objective,
                           RngStream rng);

}  // namespace mmfuse
