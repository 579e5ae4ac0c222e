#include "mmfuse/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "mmfuse/error.hpp"
#include "mmfuse/numerics/kernels.hpp"

namespace mmfuse {

double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_loss(double logit, int label) {
  if (label != 0 && label != 1) throw ContractError("bce label must be 0 or 1");
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

}  // namespace mmfuse

namespace mmfuse::ops {

namespace {

// Batch/time/feature view of a rank-2 ([T, D]) or rank-3 ([B, T, D]) tensor.
struct SeqView {
  std::size_t batch, time, dim;
  bool batched;
};

SeqView seq_view(const Tensor& t, const char* op) {
  if (t.rank() == 2) return {1, t.dim(0), t.dim(1), false};
  if (t.rank() == 3) return {t.dim(0), t.dim(1), t.dim(2), true};
  throw DimensionError(std::string(op) + " expects [T, D] or [B, T, D], got " + shape_string(t.shape()));
}

Shape seq_shape(const SeqView& v, std::size_t time, std::size_t dim) {
  return v.batched ? Shape{v.batch, time, dim} : Shape{time, dim};
}

void expect_shape(const Tensor& t, const Shape& shape, const char* what) {
  if (t.shape() != shape) {
    throw DimensionError(std::string(what) + " has shape " + shape_string(t.shape()) + ", expected " +
                         shape_string(shape));
  }
}

double* grad_if(Tape& tape, Var v) {
  if (!v.valid() || !tape.requires_grad(v)) return nullptr;
  return tape.grad_buffer(v).data();
}

template <typename F>
Var unary(Tape& tape, Var x, F forward, void (*derivative)(const double* xv, const double* yv, const double* gy,
                                                            double* gx, std::size_t n)) {
  const Tensor& xv = tape.value(x);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = forward(xv[i]);
  return tape.record(std::move(y), {x}, [x, derivative](Tape& t, Var out) {
    auto gy = t.grad(out);
    auto gx = t.grad_buffer(x);
    derivative(t.value(x).ptr(), t.value(out).ptr(), gy.data(), gx.data(), gx.size());
  });
}

}  // namespace

Var add(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  const Shape& as = av.shape();
  const Shape& bs = bv.shape();
  if (bs.size() > as.size() || !std::equal(bs.rbegin(), bs.rend(), as.rbegin())) {
    throw DimensionError("add: cannot broadcast " + shape_string(bs) + " onto " + shape_string(as));
  }
  const std::size_t n = bv.size();
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i % n];
  return tape.record(std::move(y), {a, b}, [a, b, n](Tape& t, Var out) {
    auto gy = t.grad(out);
    if (t.requires_grad(a)) {
      auto ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    }
    if (t.requires_grad(b)) {
      auto gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i % n] += gy[i];
    }
  });
}

Var sub(Tape& tape, Var a, Var b) { return add(tape, a, scale(tape, b, -1.0)); }

Var mul(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  expect_shape(bv, av.shape(), "mul operand");
  Tensor y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  return tape.record(std::move(y), {a, b}, [a, b](Tape& t, Var out) {
    auto gy = t.grad(out);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (t.requires_grad(a)) {
      auto ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      auto gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av[i];
    }
  });
}

Var scale(Tape& tape, Var a, double factor) {
  Tensor y = tape.value(a);
  for (double& v : y.data()) v *= factor;
  return tape.record(std::move(y), {a}, [a, factor](Tape& t, Var out) {
    auto gy = t.grad(out);
    auto ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += factor * gy[i];
  });
}

Var sum(Tape& tape, Var a) {
  const Tensor& av = tape.value(a);
  double s = 0.0;
  for (double v : av.data()) s += v;
  return tape.record(Tensor::scalar(s), {a}, [a](Tape& t, Var out) {
    const double g = t.grad(out)[0];
    for (double& v : t.grad_buffer(a)) v += g;
  });
}

Var mean(Tape& tape, Var a) { return scale(tape, sum(tape, a), 1.0 / static_cast<double>(tape.value(a).size())); }

Var reshape(Tape& tape, Var a, Shape shape) {
  Tensor y = tape.value(a).reshaped(std::move(shape));
  return tape.record(std::move(y), {a}, [a](Tape& t, Var out) {
    auto gy = t.grad(out);
    auto ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
  });
}

Var relu(Tape& tape, Var x) {
  return unary(
      tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](const double* xv, const double*, const double* gy, double* gx, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i)
          if (xv[i] > 0.0) gx[i] += gy[i];
      });
}

Var sigmoid(Tape& tape, Var x) {
  return unary(tape, x, stable_sigmoid, [](const double*, const double* yv, const double* gy, double* gx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * yv[i] * (1.0 - yv[i]);
  });
}

Var tanh(Tape& tape, Var x) {
  return unary(
      tape, x, [](double v) { return std::tanh(v); },
      [](const double*, const double* yv, const double* gy, double* gx, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * (1.0 - yv[i] * yv[i]);
      });
}

Var softmax(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  const std::size_t d = xv.shape().back();
  const std::size_t rows = xv.size() / d;
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.ptr() + r * d;
    double* out = y.ptr() + r * d;
    const double mx = *std::max_element(in, in + d);
    double total = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      out[i] = std::exp(in[i] - mx);
      total += out[i];
    }
    for (std::size_t i = 0; i < d; ++i) out[i] /= total;
  }
  return tape.record(std::move(y), {x}, [x, d, rows](Tape& t, Var out) {
    auto gy = t.grad(out);
    const Tensor& yv = t.value(out);
    auto gx = t.grad_buffer(x);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += gy[r * d + i] * yv[r * d + i];
      for (std::size_t i = 0; i < d; ++i) gx[r * d + i] += yv[r * d + i] * (gy[r * d + i] - dot);
    }
  });
}

Var linear(Tape& tape, Var x, Var weight, Var bias) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  if (wv.rank() != 2) throw DimensionError("linear weight must be [out, in]");
  const std::size_t in = wv.dim(1), out_dim = wv.dim(0);
  if (xv.shape().back() != in) {
    throw DimensionError("linear: input " + shape_string(xv.shape()) + " does not match weight " +
                         shape_string(wv.shape()));
  }
  if (bias.valid()) expect_shape(tape.value(bias), Shape{out_dim}, "linear bias");
  Shape out_shape = xv.shape();
  out_shape.back() = out_dim;
  const kernels::LinearDims dims{xv.size() / in, in, out_dim};
  Tensor y(out_shape);
  kernels::linear_forward(dims, xv.ptr(), wv.ptr(), bias.valid() ? tape.value(bias).ptr() : nullptr, y.ptr());
  return tape.record(std::move(y), {x, weight, bias}, [x, weight, bias, dims](Tape& t, Var out) {
    kernels::linear_backward(dims, t.value(x).ptr(), t.value(weight).ptr(), t.grad(out).data(), grad_if(t, x),
                             grad_if(t, weight), grad_if(t, bias));
  });
}

Var conv1d(Tape& tape, Var x, Var kernels, Var bias, std::size_t stride) {
  const Tensor& xv = tape.value(x);
  const Tensor& kv = tape.value(kernels);
  const SeqView sv = seq_view(xv, "conv1d");
  if (kv.rank() != 3) throw DimensionError("conv1d kernels must be [K, D_in, k]");
  if (stride == 0) throw ConfigError("conv1d stride must be positive");
  const std::size_t K = kv.dim(0), k = kv.dim(2);
  if (kv.dim(1) != sv.dim) {
    throw DimensionError("conv1d: input has " + std::to_string(sv.dim) + " channels, kernels expect " +
                         std::to_string(kv.dim(1)));
  }
  if (sv.time < k) {
    throw SequenceTooShortError("conv1d: sequence length " + std::to_string(sv.time) + " is shorter than kernel " +
                                std::to_string(k));
  }
  if (bias.valid()) expect_shape(tape.value(bias), Shape{K}, "conv1d bias");
  const kernels::Conv1dDims dims{sv.batch, sv.time, sv.dim, K, k, stride};
  Tensor y(seq_shape(sv, dims.out_time(), K));
  kernels::conv1d_forward(dims, xv.ptr(), kv.ptr(), bias.valid() ? tape.value(bias).ptr() : nullptr, y.ptr());
  return tape.record(std::move(y), {x, kernels, bias}, [x, kernels, bias, dims](Tape& t, Var out) {
    kernels::conv1d_backward(dims, t.value(x).ptr(), t.value(kernels).ptr(), t.grad(out).data(), grad_if(t, x),
                             grad_if(t, kernels), grad_if(t, bias));
  });
}

Var batch_norm(Tape& tape, Var x, Var gamma, Var beta, BatchNormStats stats, double eps, Mode mode) {
  const Tensor& xv = tape.value(x);
  const std::size_t C = xv.shape().back();
  const std::size_t N = xv.size() / C;
  expect_shape(tape.value(gamma), Shape{C}, "batch_norm gamma");
  expect_shape(tape.value(beta), Shape{C}, "batch_norm beta");
  if (!(eps > 0.0)) throw ConfigError("batch_norm eps must be positive");
  if (!stats.running_mean || !stats.running_var) throw ContractError("batch_norm needs running statistics");

  auto mu = std::make_shared<std::vector<double>>(C, 0.0);
  auto inv_std = std::make_shared<std::vector<double>>(C, 0.0);
  if (mode == Mode::Train) {
    if (N < 2) throw DegenerateBatchError("batch_norm in train mode needs at least 2 samples per channel");
    std::vector<double> var(C, 0.0);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) (*mu)[c] += xv[n * C + c];
    for (double& m : *mu) m /= static_cast<double>(N);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) {
        const double dlt = xv[n * C + c] - (*mu)[c];
        var[c] += dlt * dlt;
      }
    for (std::size_t c = 0; c < C; ++c) {
      var[c] /= static_cast<double>(N);
      (*inv_std)[c] = 1.0 / std::sqrt(var[c] + eps);
      const double unbiased = var[c] * static_cast<double>(N) / static_cast<double>(N - 1);
      (*stats.running_mean)[c] = (1.0 - stats.momentum) * (*stats.running_mean)[c] + stats.momentum * (*mu)[c];
      (*stats.running_var)[c] = (1.0 - stats.momentum) * (*stats.running_var)[c] + stats.momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      (*mu)[c] = (*stats.running_mean)[c];
      (*inv_std)[c] = 1.0 / std::sqrt((*stats.running_var)[c] + eps);
    }
  }

  const Tensor& gv = tape.value(gamma);
  const Tensor& bv = tape.value(beta);
  Tensor y(xv.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) y[n * C + c] = gv[c] * (xv[n * C + c] - (*mu)[c]) * (*inv_std)[c] + bv[c];

  const bool batch_stats = mode == Mode::Train;
  return tape.record(std::move(y), {x, gamma, beta}, [=](Tape& t, Var out) {
    auto gy = t.grad(out);
    const Tensor& xv = t.value(x);
    const Tensor& gv = t.value(gamma);
    std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) {
        const double xhat = (xv[n * C + c] - (*mu)[c]) * (*inv_std)[c];
        sum_g[c] += gy[n * C + c];
        sum_gx[c] += gy[n * C + c] * xhat;
      }
    if (t.requires_grad(gamma)) {
      auto gg = t.grad_buffer(gamma);
      for (std::size_t c = 0; c < C; ++c) gg[c] += sum_gx[c];
    }
    if (t.requires_grad(beta)) {
      auto gb = t.grad_buffer(beta);
      for (std::size_t c = 0; c < C; ++c) gb[c] += sum_g[c];
    }
    if (t.requires_grad(x)) {
      auto gx = t.grad_buffer(x);
      const double invN = 1.0 / static_cast<double>(N);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
          const double g = gy[n * C + c];
          if (batch_stats) {
            const double xhat = (xv[n * C + c] - (*mu)[c]) * (*inv_std)[c];
            gx[n * C + c] += gv[c] * (*inv_std)[c] * (g - invN * sum_g[c] - xhat * invN * sum_gx[c]);
          } else {
            gx[n * C + c] += gv[c] * (*inv_std)[c] * g;
          }
        }
    }
  });
}

Var layer_norm(Tape& tape, Var x, Var gamma, Var beta, double eps) {
  const Tensor& xv = tape.value(x);
  const std::size_t d = xv.shape().back();
  const std::size_t rows = xv.size() / d;
  expect_shape(tape.value(gamma), Shape{d}, "layer_norm gamma");
  expect_shape(tape.value(beta), Shape{d}, "layer_norm beta");
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const Tensor& gv = tape.value(gamma);
  const Tensor& bv = tape.value(beta);
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.ptr() + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += in[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (in[i] - mu) * (in[i] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t i = 0; i < d; ++i) {
      const double h = (in[i] - mu) * is;
      (*xhat)[r * d + i] = h;
      y[r * d + i] = gv[i] * h + bv[i];
    }
  }
  return tape.record(std::move(y), {x, gamma, beta}, [=](Tape& t, Var out) {
    auto gy = t.grad(out);
    const Tensor& gv = t.value(gamma);
    double* gg = grad_if(t, gamma);
    double* gb = grad_if(t, beta);
    double* gx = grad_if(t, x);
    const double invd = 1.0 / static_cast<double>(d);
    for (std::size_t r = 0; r < rows; ++r) {
      double sum_dh = 0.0, sum_dh_h = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double g = gy[r * d + i];
        const double h = (*xhat)[r * d + i];
        if (gg) gg[i] += g * h;
        if (gb) gb[i] += g;
        const double dh = g * gv[i];
        sum_dh += dh;
        sum_dh_h += dh * h;
      }
      if (!gx) continue;
      for (std::size_t i = 0; i < d; ++i) {
        const double dh = gy[r * d + i] * gv[i];
        const double h = (*xhat)[r * d + i];
        gx[r * d + i] += (*inv_std)[r] * (dh - invd * sum_dh - h * invd * sum_dh_h);
      }
    }
  });
}

Var dropout(Tape& tape, Var x, double p, Mode mode, RngStream& rng) {
  if (!(p >= 0.0) || p >= 1.0) throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  if (mode == Mode::Eval || p == 0.0) return x;
  const Tensor& xv = tape.value(x);
  auto mask = std::make_shared<std::vector<double>>(xv.size());
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    (*mask)[i] = rng.uniform() < p ? 0.0 : keep_scale;
    y[i] = xv[i] * (*mask)[i];
  }
  return tape.record(std::move(y), {x}, [x, mask](Tape& t, Var out) {
    auto gy = t.grad(out);
    auto gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * (*mask)[i];
  });
}

Var multi_head_self_attention(Tape& tape, Var x, const AttentionVars& p, std::size_t heads) {
  const Tensor& xv = tape.value(x);
  const SeqView sv = seq_view(xv, "multi_head_self_attention");
  if (heads == 0 || sv.dim % heads != 0) {
    throw ConfigError("attention model dim " + std::to_string(sv.dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const Shape wshape{sv.dim, sv.dim}, bshape{sv.dim};
  for (Var w : {p.wq, p.wk, p.wv, p.wo}) expect_shape(tape.value(w), wshape, "attention projection");
  for (Var b : {p.bq, p.bk, p.bv, p.bo}) expect_shape(tape.value(b), bshape, "attention bias");
  const kernels::AttentionDims dims{sv.batch, sv.time, sv.dim, heads};
  auto weights = [p](const Tape& t) {
    return kernels::AttentionWeights{t.value(p.wq).ptr(), t.value(p.bq).ptr(), t.value(p.wk).ptr(),
                                     t.value(p.bk).ptr(), t.value(p.wv).ptr(), t.value(p.bv).ptr(),
                                     t.value(p.wo).ptr(), t.value(p.bo).ptr()};
  };
  auto cache = std::make_shared<kernels::AttentionCache>();
  Tensor y(xv.shape());
  kernels::attention_forward(dims, xv.ptr(), weights(tape), y.ptr(), *cache);
  return tape.record(std::move(y), {x, p.wq, p.bq, p.wk, p.bk, p.wv, p.bv, p.wo, p.bo},
                     [x, p, dims, cache, weights](Tape& t, Var out) {
                       const bool any_param = t.requires_grad(p.wq) || t.requires_grad(p.wk) ||
                                              t.requires_grad(p.wv) || t.requires_grad(p.wo) ||
                                              t.requires_grad(p.bq) || t.requires_grad(p.bk) ||
                                              t.requires_grad(p.bv) || t.requires_grad(p.bo);
                       kernels::AttentionGrads grads{grad_if(t, p.wq), grad_if(t, p.bq), grad_if(t, p.wk),
                                                     grad_if(t, p.bk), grad_if(t, p.wv), grad_if(t, p.bv),
                                                     grad_if(t, p.wo), grad_if(t, p.bo)};
                       kernels::attention_backward(dims, t.value(x).ptr(), weights(t), *cache, t.grad(out).data(),
                                                   grad_if(t, x), any_param ? &grads : nullptr);
                     });
}

Var lstm(Tape& tape, Var x, Var wx, Var wh, Var bias, bool reverse) {
  const Tensor& xv = tape.value(x);
  const SeqView sv = seq_view(xv, "lstm");
  const Tensor& whv = tape.value(wh);
  if (whv.rank() != 2 || whv.dim(0) != 4 * whv.dim(1)) throw DimensionError("lstm recurrent weight must be [4H, H]");
  const std::size_t H = whv.dim(1);
  expect_shape(tape.value(wx), Shape{4 * H, sv.dim}, "lstm input weight");
  expect_shape(tape.value(bias), Shape{4 * H}, "lstm bias");
  const kernels::LstmDims dims{sv.batch, sv.time, sv.dim, H};
  auto cache = std::make_shared<kernels::LstmCache>();
  Tensor y(seq_shape(sv, sv.time, H));
  kernels::lstm_forward(dims, xv.ptr(), tape.value(wx).ptr(), whv.ptr(), tape.value(bias).ptr(), reverse, y.ptr(),
                        *cache);
  return tape.record(std::move(y), {x, wx, wh, bias}, [=](Tape& t, Var out) {
    kernels::lstm_backward(dims, t.value(x).ptr(), t.value(wx).ptr(), t.value(wh).ptr(), reverse, *cache,
                           t.grad(out).data(), grad_if(t, x), grad_if(t, wx), grad_if(t, wh), grad_if(t, bias));
  });
}

Var max_mean_pool(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  const SeqView sv = seq_view(xv, "max_mean_pool");
  if (sv.time == 0) throw DimensionError("max_mean_pool: empty sequence");
  const std::size_t B = sv.batch, T = sv.time, d = sv.dim;
  auto argmax = std::make_shared<std::vector<std::size_t>>(B * d, 0);
  Tensor y(sv.batched ? Shape{B, 2 * d} : Shape{2 * d});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < d; ++c) {
      double mx = xv[(b * T) * d + c], total = 0.0;
      std::size_t best = 0;
      for (std::size_t t = 0; t < T; ++t) {
        const double v = xv[(b * T + t) * d + c];
        total += v;
        if (v > mx) {
          mx = v;
          best = t;
        }
      }
      (*argmax)[b * d + c] = best;
      y[b * 2 * d + c] = mx;
      y[b * 2 * d + d + c] = total / static_cast<double>(T);
    }
  }
  return tape.record(std::move(y), {x}, [x, argmax, B, T, d](Tape& t, Var out) {
    auto gy = t.grad(out);
    auto gx = t.grad_buffer(x);
    const double invT = 1.0 / static_cast<double>(T);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < d; ++c) {
        gx[(b * T + (*argmax)[b * d + c]) * d + c] += gy[b * 2 * d + c];
        const double gm = gy[b * 2 * d + d + c] * invT;
        for (std::size_t tt = 0; tt < T; ++tt) gx[(b * T + tt) * d + c] += gm;
      }
  });
}

Var concat_last(Tape& tape, const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_last needs at least one input");
  const Shape& first = tape.value(parts[0]).shape();
  const Shape lead(first.begin(), first.end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var v : parts) {
    const Shape& s = tape.value(v).shape();
    if (s.size() != first.size() || !std::equal(lead.begin(), lead.end(), s.begin())) {
      throw AlignmentError("concat_last: leading dims differ, " + shape_string(first) + " vs " + shape_string(s));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  const std::size_t rows = numel(lead.empty() ? Shape{1} : lead);
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor y(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = tape.value(parts[p]);
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(v.ptr() + r * widths[p], v.ptr() + (r + 1) * widths[p], y.ptr() + r * total + offset);
    offset += widths[p];
  }
  return tape.record(std::move(y), parts, [parts, widths, rows, total](Tape& t, Var out) {
    auto gy = t.grad(out);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      if (t.requires_grad(parts[p])) {
        auto gp = t.grad_buffer(parts[p]);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t i = 0; i < widths[p]; ++i) gp[r * widths[p] + i] += gy[r * total + offset + i];
      }
      offset += widths[p];
    }
  });
}

Var time_step(Tape& tape, Var x, std::size_t step) {
  const Tensor& xv = tape.value(x);
  const SeqView sv = seq_view(xv, "time_step");
  if (step >= sv.time) throw DimensionError("time_step index out of range");
  const std::size_t B = sv.batch, T = sv.time, C = sv.dim;
  Tensor y(sv.batched ? Shape{B, C} : Shape{C});
  for (std::size_t b = 0; b < B; ++b)
    std::copy(xv.ptr() + (b * T + step) * C, xv.ptr() + (b * T + step + 1) * C, y.ptr() + b * C);
  return tape.record(std::move(y), {x}, [x, B, T, C, step](Tape& t, Var out) {
    auto gy = t.grad(out);
    auto gx = t.grad_buffer(x);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) gx[(b * T + step) * C + c] += gy[b * C + c];
  });
}

Var weighted_time_sum(Tape& tape, Var states, Var weights) {
  const Tensor& sv = tape.value(states);
  const Tensor& wv = tape.value(weights);
  if (sv.rank() != 3) throw DimensionError("weighted_time_sum states must be [B, T, C]");
  const std::size_t B = sv.dim(0), T = sv.dim(1), C = sv.dim(2);
  expect_shape(wv, Shape{B, T}, "weighted_time_sum weights");
  Tensor y({B, C});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) y[b * C + c] += wv[b * T + t] * sv[(b * T + t) * C + c];
  return tape.record(std::move(y), {states, weights}, [states, weights, B, T, C](Tape& t, Var out) {
    auto gy = t.grad(out);
    const Tensor& sv = t.value(states);
    const Tensor& wv = t.value(weights);
    double* gs = grad_if(t, states);
    double* gw = grad_if(t, weights);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t tt = 0; tt < T; ++tt)
        for (std::size_t c = 0; c < C; ++c) {
          if (gs) gs[(b * T + tt) * C + c] += wv[b * T + tt] * gy[b * C + c];
          if (gw) gw[b * T + tt] += gy[b * C + c] * sv[(b * T + tt) * C + c];
        }
  });
}

Var outer_fusion(Tape& tape, const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("outer_fusion needs at least one input");
  const std::size_t B = tape.value(parts[0]).dim(0);
  std::vector<std::size_t> widths;  // augmented widths H_i + 1
  std::size_t total = 1;
  for (Var v : parts) {
    const Tensor& pv = tape.value(v);
    if (pv.rank() != 2 || pv.dim(0) != B) throw AlignmentError("outer_fusion parts must be [B, H_i] with a shared B");
    widths.push_back(pv.dim(1) + 1);
    total *= pv.dim(1) + 1;
  }
  auto augmented = [&tape, parts, widths](std::size_t p, std::size_t b, std::size_t j) {
    const Tensor& pv = tape.value(parts[p]);
    return j + 1 == widths[p] ? 1.0 : pv[b * (widths[p] - 1) + j];
  };
  Tensor y({B, total});
  std::vector<std::size_t> idx(parts.size());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rem = flat;
      double prod = 1.0;
      for (std::size_t p = parts.size(); p-- > 0;) {
        idx[p] = rem % widths[p];
        rem /= widths[p];
        prod *= augmented(p, b, idx[p]);
      }
      y[b * total + flat] = prod;
    }
  }
  return tape.record(std::move(y), parts, [parts, widths, B, total](Tape& t, Var out) {
    auto gy = t.grad(out);
    auto aug = [&t, &parts, &widths](std::size_t p, std::size_t b, std::size_t j) {
      return j + 1 == widths[p] ? 1.0 : t.value(parts[p])[b * (widths[p] - 1) + j];
    };
    std::vector<double*> grads(parts.size());
    for (std::size_t p = 0; p < parts.size(); ++p) grads[p] = grad_if(t, parts[p]);
    std::vector<std::size_t> idx(parts.size());
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t flat = 0; flat < total; ++flat) {
        const double g = gy[b * total + flat];
        if (g == 0.0) continue;
        std::size_t rem = flat;
        for (std::size_t p = parts.size(); p-- > 0;) {
          idx[p] = rem % widths[p];
          rem /= widths[p];
        }
        for (std::size_t p = 0; p < parts.size(); ++p) {
          if (!grads[p] || idx[p] + 1 == widths[p]) continue;
          double others = 1.0;
          for (std::size_t q = 0; q < parts.size(); ++q)
            if (q != p) others *= aug(q, b, idx[q]);
          grads[p][b * (widths[p] - 1) + idx[p]] += g * others;
        }
      }
    }
  });
}

Var bce_with_logits(Tape& tape, Var logits, std::span<const double> labels) {
  const Tensor& zv = tape.value(logits);
  if (zv.size() != labels.size()) {
    throw DimensionError("bce_with_logits: " + std::to_string(zv.size()) + " logits vs " +
                         std::to_string(labels.size()) + " labels");
  }
  auto ys = std::make_shared<std::vector<double>>(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t i = 0; i < zv.size(); ++i) {
    const double y = (*ys)[i];
    if (y != 0.0 && y != 1.0) throw ContractError("bce labels must be 0 or 1");
    total += bce_loss(zv[i], static_cast<int>(y));
  }
  const double n = static_cast<double>(zv.size());
  return tape.record(Tensor::scalar(total / n), {logits}, [logits, ys, n](Tape& t, Var out) {
    const double g = t.grad(out)[0] / n;
    const Tensor& zv = t.value(logits);
    auto gz = t.grad_buffer(logits);
    for (std::size_t i = 0; i < gz.size(); ++i) gz[i] += g * (stable_sigmoid(zv[i]) - (*ys)[i]);
  });
}

}  // namespace mmfuse::ops
