#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmfuse/numerics/tensor.hpp"

namespace mmfuse {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Coupled L2: the penalty gradient weight_decay * p is added to the loss gradient.
  double weight_decay = 0.0;
};

/// Moment estimates for a fixed, ordered list of parameters.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

void validate(const AdamConfig& config);

/// One bias-corrected Adam update over params (each must carry a gradient
/// buffer). A fresh state is sized on first use; afterwards the parameter
/// shapes must keep matching the moments.
void adam_step(std::span<Tensor* const> params, AdamState& state, const AdamConfig& config);

}  // namespace mmfuse
