#include "mmfuse/explain/attribution.hpp"

#include <algorithm>
#include <cstring>
#include <exception>
#include <numeric>
#include <string>

#include "mmfuse/error.hpp"
#include "mmfuse/numerics/ops.hpp"

namespace mmfuse {

LogitFn model_logit(Model& model) {
  return [&model](Tape& tape, const ModelInputs& inputs) {
    RngStream unused(0);
    return model.forward(tape, inputs, Mode::Eval, unused, ParamBinding::Constant);
  };
}

SessionInputs session_inputs(const SessionRecord& s, const std::optional<FeatureMask>& mask) {
  SessionInputs out{s.audio, s.video, s.text};
  if (!mask) return out;
  for (std::size_t m = 0; m < 3; ++m) {
    Tensor& x = out[m];
    const auto& keep = mask->keep[m];
    const auto& fill = mask->fill[m];
    if (keep.size() != x.dim(1)) throw DimensionError("feature mask width does not match the session");
    for (std::size_t t = 0; t < x.dim(0); ++t) {
      for (std::size_t c = 0; c < x.dim(1); ++c) {
        if (!keep[c]) x.at(t, c) = fill[c];
      }
    }
  }
  return out;
}

double AttributionResult::total() const {
  double s = 0.0;
  for (const Tensor& t : values) {
    for (double v : t.data()) s += v;
  }
  return s;
}

namespace {

std::vector<double> logits_of(const LogitFn& f, const std::array<const Tensor*, 3>& rows) {
  Tape tape;
  ModelInputs in;
  for (std::size_t m = 0; m < 3; ++m) in[m] = tape.constant(rows[m]->reshaped({1, rows[m]->dim(0), rows[m]->dim(1)}));
  const Var out = f(tape, in);
  return tape.value(out).values();
}

double logit(const LogitFn& f, const SessionInputs& x) { return logits_of(f, {&x[0], &x[1], &x[2]}).at(0); }

}  // namespace

AttributionResult integrated_gradients(const LogitFn& f, const SessionInputs& x, const SessionInputs& baseline,
                                       const IgOptions& options) {
  if (options.steps == 0) throw ConfigError("integrated gradients needs at least one step");
  const std::size_t chunk = std::max<std::size_t>(1, options.chunk);
  for (std::size_t m = 0; m < 3; ++m) {
    if (x[m].shape() != baseline[m].shape() || x[m].rank() != 2) {
      throw DimensionError("integrated gradients: input " + shape_string(x[m].shape()) + " and baseline " +
                           shape_string(baseline[m].shape()) + " differ");
    }
  }
  std::array<std::vector<double>, 3> grad_sum;
  for (std::size_t m = 0; m < 3; ++m) grad_sum[m].assign(x[m].size(), 0.0);

  const double m_steps = static_cast<double>(options.steps);
  for (std::size_t start = 0; start < options.steps; start += chunk) {
    const std::size_t n = std::min(chunk, options.steps - start);
    Tape tape;
    ModelInputs in;
    for (std::size_t m = 0; m < 3; ++m) {
      const std::size_t T = x[m].dim(0), D = x[m].dim(1), len = T * D;
      Tensor batch({n, T, D});
      for (std::size_t j = 0; j < n; ++j) {
        const double alpha = (static_cast<double>(start + j) + 0.5) / m_steps;
        double* dst = batch.ptr() + j * len;
        for (std::size_t i = 0; i < len; ++i) dst[i] = baseline[m][i] + alpha * (x[m][i] - baseline[m][i]);
      }
      in[m] = tape.input(std::move(batch));
    }
    const Var out = f(tape, in);
    tape.backward(ops::sum(tape, out));
    for (std::size_t m = 0; m < 3; ++m) {
      auto g = tape.grad(in[m]);
      if (g.empty()) continue;
      const std::size_t len = x[m].size();
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < len; ++i) grad_sum[m][i] += g[j * len + i];
      }
    }
  }

  AttributionResult r;
  for (std::size_t m = 0; m < 3; ++m) {
    Tensor a(x[m].shape());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = (x[m][i] - baseline[m][i]) * grad_sum[m][i] / m_steps;
    r.values[m] = std::move(a);
  }
  r.output = logit(f, x);
  r.baseline_output = logit(f, baseline);
  r.baseline_outputs = {r.baseline_output};
  r.residuals = {r.total() - (r.output - r.baseline_output)};
  return r;
}

std::vector<std::size_t> sample_without_replacement(std::size_t pool_size, std::size_t n, RngStream& rng) {
  if (n > pool_size) throw ConfigError("cannot draw " + std::to_string(n) + " baselines from a pool of " +
                                       std::to_string(pool_size));
  std::vector<std::size_t> idx(pool_size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first n slots are the sample.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(pool_size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

AttributionResult gradient_explainer(const LogitFn& f, const SessionInputs& x, std::span<const SessionInputs> pool,
                                     std::size_t n_baselines, RngStream rng, const IgOptions& options) {
  if (pool.empty()) throw ConfigError("gradient explainer: empty baseline pool");
  if (n_baselines == 0) throw ConfigError("gradient explainer: n_baselines must be positive");
  const std::vector<std::size_t> picks = sample_without_replacement(pool.size(), n_baselines, rng);
  AttributionResult r;
  for (std::size_t m = 0; m < 3; ++m) r.values[m] = Tensor(x[m].shape());
  double base_sum = 0.0;
  for (std::size_t k : picks) {
    AttributionResult one = integrated_gradients(f, x, pool[k], options);
    for (std::size_t m = 0; m < 3; ++m) {
      for (std::size_t i = 0; i < one.values[m].size(); ++i) r.values[m][i] += one.values[m][i];
    }
    r.output = one.output;
    base_sum += one.baseline_output;
    r.baseline_outputs.push_back(one.baseline_output);
    r.residuals.push_back(one.residuals.front());
  }
  const double inv = 1.0 / static_cast<double>(picks.size());
  for (Tensor& t : r.values) {
    for (double& v : t.data()) v *= inv;
  }
  r.baseline_output = base_sum * inv;
  return r;
}

std::vector<AttributionResult> explain_sessions(Model& model, const std::vector<SessionRecord>& cohort,
                                                std::span<const std::size_t> targets,
                                                std::span<const std::size_t> pool_indices,
                                                const std::optional<FeatureMask>& mask, const ExplainOptions& options) {
  std::vector<SessionInputs> pool;
  pool.reserve(pool_indices.size());
  for (std::size_t i : pool_indices) pool.push_back(session_inputs(cohort.at(i), mask));
  if (options.n_baselines > pool.size()) {
    throw ConfigError("n_baselines " + std::to_string(options.n_baselines) + " exceeds the baseline pool of " +
                      std::to_string(pool.size()));
  }
  const LogitFn f = model_logit(model);
  const RngStream root(options.seed);
  std::vector<AttributionResult> out(targets.size());
  std::vector<std::string> errors(targets.size());
  const int threads = static_cast<int>(std::max<std::size_t>(1, options.jobs));
  const auto n = static_cast<long long>(targets.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
  for (long long k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    try {
      const SessionInputs x = session_inputs(cohort.at(targets[i]), mask);
      out[i] = gradient_explainer(f, x, pool, options.n_baselines, root.derive(static_cast<std::uint64_t>(i)),
                                  options.ig);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const std::string& e : errors) {
    if (!e.empty()) throw TrainingError("attribution failed: " + e);
  }
  return out;
}

}  // namespace mmfuse
