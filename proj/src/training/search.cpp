#include "mmfuse/training/search.hpp"

#include <cmath>

#include "mmfuse/error.hpp"

namespace mmfuse {

util::Json to_json(const HyperParams& h) {
  return {{"encoder", to_json(h.encoder)},
          {"fusion", to_json(h.fusion)},
          {"baseline", to_json(h.baseline)},
          {"lr", h.adam.lr},
          {"weight_decay", h.adam.weight_decay}};
}

void validate(const SearchSpace& s) {
  auto nonempty = [](const auto& v, const char* name) {
    if (v.empty()) throw ConfigError(std::string("search.") + name + " must not be empty");
  };
  nonempty(s.cnn_layers, "cnn_layers");
  nonempty(s.cnn_channels, "cnn_channels");
  nonempty(s.kernel_sizes, "kernel_sizes");
  nonempty(s.fc_layers, "fc_layers");
  nonempty(s.fc_sizes, "fc_sizes");
  nonempty(s.transformer_layers, "transformer_layers");
  nonempty(s.transformer_ff, "transformer_ff");
  nonempty(s.attention_heads, "attention_heads");
  nonempty(s.lstm_hidden, "lstm_hidden");
  nonempty(s.weight_decay, "weight_decay");
  if (!(s.lr_min > 0.0 && s.lr_min <= s.lr_max)) throw ConfigError("search: need 0 < lr_min <= lr_max");
  if (s.budget < 1) throw ConfigError("search.budget must be at least 1");
}

util::Json to_json(const SearchSpace& s) {
  return {{"cnn_layers", s.cnn_layers},
          {"cnn_channels", s.cnn_channels},
          {"kernel_sizes", s.kernel_sizes},
          {"fc_layers", s.fc_layers},
          {"fc_sizes", s.fc_sizes},
          {"transformer_layers", s.transformer_layers},
          {"transformer_ff", s.transformer_ff},
          {"attention_heads", s.attention_heads},
          {"lstm_hidden", s.lstm_hidden},
          {"lr_min", s.lr_min},
          {"lr_max", s.lr_max},
          {"weight_decay", s.weight_decay},
          {"budget", s.budget}};
}

SearchSpace search_space_from_json(const util::Json& j) {
  const char* ctx = "search";
  util::require_object(j, ctx);
  util::reject_unknown_keys(j,
                            {"cnn_layers", "cnn_channels", "kernel_sizes", "fc_layers", "fc_sizes",
                             "transformer_layers", "transformer_ff", "attention_heads", "lstm_hidden", "lr_min",
                             "lr_max", "weight_decay", "budget"},
                            ctx);
  SearchSpace s;
  util::read_optional(j, "cnn_layers", s.cnn_layers, ctx);
  util::read_optional(j, "cnn_channels", s.cnn_channels, ctx);
  util::read_optional(j, "kernel_sizes", s.kernel_sizes, ctx);
  util::read_optional(j, "fc_layers", s.fc_layers, ctx);
  util::read_optional(j, "fc_sizes", s.fc_sizes, ctx);
  util::read_optional(j, "transformer_layers", s.transformer_layers, ctx);
  util::read_optional(j, "transformer_ff", s.transformer_ff, ctx);
  util::read_optional(j, "attention_heads", s.attention_heads, ctx);
  util::read_optional(j, "lstm_hidden", s.lstm_hidden, ctx);
  util::read_optional(j, "lr_min", s.lr_min, ctx);
  util::read_optional(j, "lr_max", s.lr_max, ctx);
  util::read_optional(j, "weight_decay", s.weight_decay, ctx);
  util::read_optional(j, "budget", s.budget, ctx);
  validate(s);
  return s;
}

namespace {

template <typename T>
T pick(const std::vector<T>& choices, RngStream& rng) {
  return choices[static_cast<std::size_t>(rng.uniform_index(choices.size()))];
}

}  // namespace

HyperParams sample_hyperparams(const SearchSpace& s, const HyperParams& base, RngStream& rng) {
  validate(s);
  HyperParams h = base;
  const std::size_t stride = base.encoder.layers.empty() ? 2 : base.encoder.layers.front().stride;
  const std::size_t layers = pick(s.cnn_layers, rng);
  const std::size_t channels = pick(s.cnn_channels, rng);
  h.encoder.layers.clear();
  for (std::size_t i = 0; i < layers; ++i) h.encoder.layers.push_back({channels, pick(s.kernel_sizes, rng), stride});
  const std::size_t fc = pick(s.fc_layers, rng);
  const std::size_t fc_size = pick(s.fc_sizes, rng);
  h.encoder.head_hidden.assign(fc, fc_size);
  h.fusion.head_hidden.assign(fc, fc_size);
  h.baseline.head_hidden.assign(fc, fc_size);
  h.fusion.layers = pick(s.transformer_layers, rng);
  h.fusion.ff_dim = pick(s.transformer_ff, rng);
  h.fusion.heads = pick(s.attention_heads, rng);
  h.baseline.hidden = pick(s.lstm_hidden, rng);
  h.adam.lr = std::exp(rng.uniform(std::log(s.lr_min), std::log(s.lr_max)));
  if (s.lr_min == s.lr_max) h.adam.lr = s.lr_min;
  h.adam.weight_decay = pick(s.weight_decay, rng);
  return h;
}

SearchResult random_search(const SearchSpace& space, const HyperParams& base, const SearchObjective& objective,
                           RngStream rng) {
  validate(space);
  SearchResult result;
  bool found = false;
  for (std::size_t i = 0; i < space.budget; ++i) {
    SearchTrial trial{i, sample_hyperparams(space, base, rng), std::nullopt, {}};
    try {
      const double score = objective(trial.params);
      if (!std::isfinite(score)) throw TrainingError("objective returned a non-finite score");
      trial.score = score;
      if (!found || score > result.best_score) {
        found = true;
        result.best = trial.params;
        result.best_score = score;
        result.best_index = i;
      }
    } catch (const Error& e) {
      trial.error = e.what();
    }
    result.trace.push_back(std::move(trial));
  }
  if (!found) throw TrainingError("random search: every sampled configuration failed");
  return result;
}

}  // namespace mmfuse
