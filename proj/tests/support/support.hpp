#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mmfuse/dataset/cohort.hpp"
#include "mmfuse/models/model.hpp"
#include "mmfuse/numerics/rng.hpp"
#include "mmfuse/numerics/tape.hpp"

namespace mmfuse::testing {

Tensor random_tensor(Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0);

/// Builds a scalar loss from leaves bound to the checked tensors (same order).
using LossFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "<tensor>[<element>]"
};

/// Central finite differences against tape gradients. Relative error is
/// |a - n| / max(|a|, |n|, floor). When max_per_tensor is non-zero only that
/// many elements per tensor are probed (chosen at random).
GradcheckResult gradcheck(const std::vector<Tensor*>& tensors, const LossFn& loss, double eps = 1e-5,
                          double floor = 1e-6, std::size_t max_per_tensor = 0, std::uint64_t seed = 0);

/// Mean BCE of model logits over every trainable parameter (running stats
/// excluded). Train mode replays the same dropout masks on each evaluation.
GradcheckResult gradcheck_model(Model& model, const std::array<Tensor, 3>& inputs, const std::vector<double>& labels,
                                Mode mode, std::size_t max_per_tensor = 0, double eps = 1e-5, double floor = 1e-6);

struct GradientCase {
  std::string name;
  GradcheckResult result;
};

/// Layer-level and full-architecture checks on random toy instances
/// (T <= 20, hidden dims <= 8).
std::vector<GradientCase> gradient_suite(std::uint64_t seed);

/// Small cohort with fast defaults for tests.
CohortConfig small_cohort_config(std::size_t participants, std::size_t frames, std::uint64_t seed);

}  // namespace mmfuse::testing
