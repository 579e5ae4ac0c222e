#pragma once

// Differentiable layer set. Every op evaluates eagerly, records its backward
// rule on the tape, and returns the output handle.
//
// Sequence ops accept either a single sequence [T, D] or a batch [B, T, D]
// and keep the input's rank in their output.

#include <cstddef>
#include <span>
#include <vector>

#include "mmfuse/numerics/rng.hpp"
#include "mmfuse/numerics/tape.hpp"

namespace mmfuse::ops {

/// a + b. b must equal a's shape or a's trailing dims (broadcast over the
/// leading ones).
Var add(Tape& tape, Var a, Var b);
Var sub(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);
Var sum(Tape& tape, Var a);
Var mean(Tape& tape, Var a);
Var reshape(Tape& tape, Var a, Shape shape);

Var relu(Tape& tape, Var x);
/// 1/(1+exp(-x)), evaluated on the branch that cannot overflow.
Var sigmoid(Tape& tape, Var x);
Var tanh(Tape& tape, Var x);
/// Softmax over the last dimension with per-slice max subtraction.
Var softmax(Tape& tape, Var x);

/// Affine map over the last dim: weight [out, in], bias [out] (may be invalid).
Var linear(Tape& tape, Var x, Var weight, Var bias);

/// Valid-padding strided convolution along time. kernels [K, D_in, k].
/// Output length floor((T - k) / stride) + 1.
Var conv1d(Tape& tape, Var x, Var kernels, Var bias, std::size_t stride);

struct BatchNormStats {
  Tensor* running_mean = nullptr;
  Tensor* running_var = nullptr;
  double momentum = 0.1;
};

/// Per-channel (last dim) normalisation pooled over every other axis.
/// Train mode uses batch statistics and updates the running estimates; eval
/// mode reads them.
Var batch_norm(Tape& tape, Var x, Var gamma, Var beta, BatchNormStats stats, double eps, Mode mode);

Var layer_norm(Tape& tape, Var x, Var gamma, Var beta, double eps);

/// Inverted dropout: survivors are scaled by 1/(1-p), eval mode is identity.
Var dropout(Tape& tape, Var x, double p, Mode mode, RngStream& rng);

struct AttentionVars {
  Var wq, bq, wk, bk, wv, bv, wo, bo;
};

/// Bidirectional scaled dot-product self-attention over [T, d] or [B, T, d].
Var multi_head_self_attention(Tape& tape, Var x, const AttentionVars& params, std::size_t heads);

/// LSTM over time with zero initial state. wx [4H, D], wh [4H, H],
/// bias [4H], gate order (input, forget, cell, output). With reverse the
/// sequence is consumed from the last frame; outputs stay time-aligned.
Var lstm(Tape& tape, Var x, Var wx, Var wh, Var bias, bool reverse);

/// [T, d] -> [2d] or [B, T, d] -> [B, 2d], laid out as (max || mean).
Var max_mean_pool(Tape& tape, Var x);

Var concat_last(Tape& tape, const std::vector<Var>& parts);

/// Frame t of [T, C] or [B, T, C].
Var time_step(Tape& tape, Var x, std::size_t t);

/// sum_t weights[b, t] * states[b, t, :]; states [B, T, C], weights [B, T].
Var weighted_time_sum(Tape& tape, Var states, Var weights);

/// Flattened outer product of [B, H_i] parts, each augmented with a trailing 1.
/// Output [B, prod(H_i + 1)], last part varying fastest.
Var outer_fusion(Tape& tape, const std::vector<Var>& parts);

/// Mean binary cross-entropy over a batch of logits [B] or [B, 1].
Var bce_with_logits(Tape& tape, Var logits, std::span<const double> labels);

}  // namespace mmfuse::ops

namespace mmfuse {

/// -[y log s(z) + (1-y) log(1-s(z))] in the overflow-free form.
double bce_loss(double logit, int label);
double stable_sigmoid(double z);

}  // namespace mmfuse
