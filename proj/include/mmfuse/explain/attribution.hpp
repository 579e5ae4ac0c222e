#pragma once

// Path attributions on the model logit. Integrated gradients uses the
// midpoint rule
//   a_i = (x_i - b_i) * (1/m) * sum_{j=1..m} df/dx_i (b + (j - 1/2)/m * (x - b)),
// and the gradient explainer averages it over baselines drawn without
// replacement from a pool of training sessions.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mmfuse/dataset/session.hpp"
#include "mmfuse/models/model.hpp"
#include "mmfuse/training/examples.hpp"

namespace mmfuse {

/// One session's per-modality [T, D] inputs.
using SessionInputs = std::array<Tensor, 3>;

/// Differentiable logits [B] of batched [B, T, D] inputs.
using LogitFn = std::function<Var(Tape&, const ModelInputs&)>;

/// Eval mode, parameters bound as constants.
LogitFn model_logit(Model& model);

/// The session's tensors with an optional feature mask applied.
SessionInputs session_inputs(const SessionRecord& session, const std::optional<FeatureMask>& mask = std::nullopt);

struct AttributionResult {
  std::array<Tensor, 3> values;       // same shapes as the inputs
  double output = 0.0;                // f(x)
  double baseline_output = 0.0;       // mean of f(b) over the baselines used
  std::vector<double> baseline_outputs;
  /// Per baseline: sum of that baseline's attributions - (f(x) - f(b)).
  std::vector<double> residuals;

  double total() const;
};

struct IgOptions {
  std::size_t steps = 256;
  std::size_t chunk = 32;  // interpolation points per forward/backward batch
};

/// Throws DimensionError when x and baseline shapes differ.
AttributionResult integrated_gradients(const LogitFn& f, const SessionInputs& x, const SessionInputs& baseline,
                                       const IgOptions& options = {});

/// Throws ConfigError when n_baselines is 0 or exceeds the pool.
AttributionResult gradient_explainer(const LogitFn& f, const SessionInputs& x, std::span<const SessionInputs> pool,
                                     std::size_t n_baselines, RngStream rng, const IgOptions& options = {});

/// n distinct indices of [0, pool_size), in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t pool_size, std::size_t n, RngStream& rng);

struct ExplainOptions {
  IgOptions ig;
  std::size_t n_baselines = 16;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

/// Gradient-explainer attributions for each target session, with baselines
/// from the pool sessions. Session k uses RngStream(seed).derive(k).
std::vector<AttributionResult> explain_sessions(Model& model, const std::vector<SessionRecord>& cohort,
                                                std::span<const std::size_t> targets,
                                                std::span<const std::size_t> pool,
                                                const std::optional<FeatureMask>& mask, const ExplainOptions& options);

}  // namespace mmfuse
