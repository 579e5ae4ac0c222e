#include "mmfuse/numerics/adam.hpp"

#include <cmath>

#include "mmfuse/error.hpp"

namespace mmfuse {

void validate(const AdamConfig& c) {
  if (!(c.lr > 0.0)) throw ConfigError("adam lr must be positive");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0)) throw ConfigError("adam beta1 must lie in [0, 1)");
  if (!(c.beta2 >= 0.0 && c.beta2 < 1.0)) throw ConfigError("adam beta2 must lie in [0, 1)");
  if (!(c.eps > 0.0)) throw ConfigError("adam eps must be positive");
  if (!(c.weight_decay >= 0.0)) throw ConfigError("adam weight_decay must be non-negative");
}

void adam_step(std::span<Tensor* const> params, AdamState& state, const AdamConfig& config) {
  validate(config);
  if (state.m.empty() && state.step == 0) {
    for (Tensor* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("adam state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].shape() != params[i]->shape()) {
      throw DimensionError("adam moment shape " + shape_string(state.m[i].shape()) + " does not match parameter " +
                           shape_string(params[i]->shape()));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    p.ensure_grad();
    auto g = p.grad();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    auto w = p.data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double grad = g[j] + config.weight_decay * w[j];
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * grad;
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * grad * grad;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

}  // namespace mmfuse
