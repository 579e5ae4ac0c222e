// OpenMP kernels. Work is split over disjoint outputs (rows, channels or batch
// samples); weight gradients that every sample touches are accumulated into
// per-sample buffers and reduced in sample order.

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mmfuse/numerics/kernels.hpp"

namespace mmfuse::kernels {

namespace {

// Parallel regions below this many multiply-adds are not worth a fork.
constexpr std::size_t kParallelGrain = 1 << 15;

bool worth_parallel(std::size_t work) { return work >= kParallelGrain && !omp_in_parallel(); }

inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Reduces per-sample partial buffers into out[0..n) in sample order.
void reduce_partials(const std::vector<double>& partials, std::size_t samples, std::size_t n, double* out) {
  if (!out) return;
  const bool par = worth_parallel(samples * n);
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t b = 0; b < samples; ++b) acc += partials[b * n + i];
    out[i] += acc;
  }
}

// [K, D, k] -> [K, k*D] so a window of k consecutive frames is one contiguous dot.
std::vector<double> kernel_to_window_major(const Conv1dDims& d, const double* w) {
  const std::size_t span = d.kernel * d.in_channels;
  std::vector<double> wt(d.out_channels * span);
  for (std::size_t j = 0; j < d.out_channels; ++j)
    for (std::size_t c = 0; c < d.in_channels; ++c)
      for (std::size_t tau = 0; tau < d.kernel; ++tau)
        wt[j * span + tau * d.in_channels + c] = w[(j * d.in_channels + c) * d.kernel + tau];
  return wt;
}

}  // namespace

void conv1d_forward(const Conv1dDims& d, const double* x, const double* w, const double* bias, double* y) {
  const std::size_t out_t = d.out_time();
  const std::size_t span = d.kernel * d.in_channels;
  const std::vector<double> wt = kernel_to_window_major(d, w);
  const std::size_t rows = d.batch * out_t;
  const bool par = worth_parallel(rows * span * d.out_channels);
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t b = r / out_t, t = r % out_t;
    const double* window = x + (b * d.time + t * d.stride) * d.in_channels;
    double* out = y + r * d.out_channels;
    for (std::size_t j = 0; j < d.out_channels; ++j) {
      out[j] = (bias ? bias[j] : 0.0) + dot(window, &wt[j * span], span);
    }
  }
}

void conv1d_backward(const Conv1dDims& d, const double* x, const double* w, const double* dy, double* dx,
                     double* dw, double* dbias) {
  const std::size_t out_t = d.out_time();
  const std::size_t span = d.kernel * d.in_channels;
  const std::size_t K = d.out_channels;
  const bool par = worth_parallel(d.batch * out_t * span * K);

  if (dw || dbias) {
    std::vector<double> dwt(dw ? K * span : 0, 0.0);
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t j = 0; j < K; ++j) {
      double bacc = 0.0;
      for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t t = 0; t < out_t; ++t) {
          const double g = dy[(b * out_t + t) * K + j];
          bacc += g;
          if (dw && g != 0.0) axpy(g, x + (b * d.time + t * d.stride) * d.in_channels, &dwt[j * span], span);
        }
      }
      if (dbias) dbias[j] += bacc;
    }
    if (dw) {
      for (std::size_t j = 0; j < K; ++j)
        for (std::size_t c = 0; c < d.in_channels; ++c)
          for (std::size_t tau = 0; tau < d.kernel; ++tau)
            dw[(j * d.in_channels + c) * d.kernel + tau] += dwt[j * span + tau * d.in_channels + c];
    }
  }

  if (dx) {
    const std::vector<double> wt = kernel_to_window_major(d, w);
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t b = 0; b < d.batch; ++b) {
      for (std::size_t t = 0; t < out_t; ++t) {
        double* window = dx + (b * d.time + t * d.stride) * d.in_channels;
        const double* g = dy + (b * out_t + t) * K;
        for (std::size_t j = 0; j < K; ++j) {
          if (g[j] != 0.0) axpy(g[j], &wt[j * span], window, span);
        }
      }
    }
  }
}

void linear_forward(const LinearDims& d, const double* x, const double* w, const double* bias, double* y) {
  const bool par = worth_parallel(d.rows * d.in * d.out);
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t n = 0; n < d.rows; ++n) {
    const double* xr = x + n * d.in;
    double* yr = y + n * d.out;
    for (std::size_t o = 0; o < d.out; ++o) yr[o] = (bias ? bias[o] : 0.0) + dot(xr, w + o * d.in, d.in);
  }
}

void linear_backward(const LinearDims& d, const double* x, const double* w, const double* dy, double* dx,
                     double* dw, double* dbias) {
  const bool par = worth_parallel(d.rows * d.in * d.out);
  if (dw || dbias) {
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t o = 0; o < d.out; ++o) {
      double bacc = 0.0;
      for (std::size_t n = 0; n < d.rows; ++n) {
        const double g = dy[n * d.out + o];
        bacc += g;
        if (dw && g != 0.0) axpy(g, x + n * d.in, dw + o * d.in, d.in);
      }
      if (dbias) dbias[o] += bacc;
    }
  }
  if (dx) {
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t n = 0; n < d.rows; ++n) {
      const double* g = dy + n * d.out;
      for (std::size_t o = 0; o < d.out; ++o) {
        if (g[o] != 0.0) axpy(g[o], w + o * d.in, dx + n * d.in, d.in);
      }
    }
  }
}

namespace {

// Serial per-sample helpers; the batch loop above them is the parallel axis.
void project(std::size_t rows, std::size_t dim, const double* x, const double* w, const double* bias, double* y) {
  for (std::size_t n = 0; n < rows; ++n)
    for (std::size_t o = 0; o < dim; ++o) y[n * dim + o] = (bias ? bias[o] : 0.0) + dot(x + n * dim, w + o * dim, dim);
}

void project_backward(std::size_t rows, std::size_t dim, const double* x, const double* w, const double* dy,
                      double* dx, double* dw, double* dbias) {
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t o = 0; o < dim; ++o) {
      const double g = dy[n * dim + o];
      if (g == 0.0) continue;
      if (dbias) dbias[o] += g;
      if (dw) axpy(g, x + n * dim, dw + o * dim, dim);
      if (dx) axpy(g, w + o * dim, dx + n * dim, dim);
    }
  }
}

}  // namespace

void attention_forward(const AttentionDims& d, const double* x, const AttentionWeights& w, double* y,
                       AttentionCache& cache) {
  const std::size_t T = d.time, D = d.model_dim, H = d.heads, dh = d.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.q.assign(d.batch * T * D, 0.0);
  cache.k.assign(d.batch * T * D, 0.0);
  cache.v.assign(d.batch * T * D, 0.0);
  cache.context.assign(d.batch * T * D, 0.0);
  cache.probs.assign(d.batch * H * T * T, 0.0);
  const bool par = worth_parallel(d.batch * T * D * (4 * D + 2 * T));
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t b = 0; b < d.batch; ++b) {
    const double* xb = x + b * T * D;
    double* q = &cache.q[b * T * D];
    double* k = &cache.k[b * T * D];
    double* v = &cache.v[b * T * D];
    double* ctx = &cache.context[b * T * D];
    project(T, D, xb, w.wq, w.bq, q);
    project(T, D, xb, w.wk, w.bk, k);
    project(T, D, xb, w.wv, w.bv, v);
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t t = 0; t < T; ++t) {
        double* p = &cache.probs[((b * H + h) * T + t) * T];
        double mx = -INFINITY;
        for (std::size_t u = 0; u < T; ++u) {
          p[u] = dot(q + t * D + off, k + u * D + off, dh) * scale;
          mx = std::max(mx, p[u]);
        }
        double total = 0.0;
        for (std::size_t u = 0; u < T; ++u) {
          p[u] = std::exp(p[u] - mx);
          total += p[u];
        }
        const double inv = 1.0 / total;
        for (std::size_t u = 0; u < T; ++u) {
          p[u] *= inv;
          axpy(p[u], v + u * D + off, ctx + t * D + off, dh);
        }
      }
    }
    project(T, D, ctx, w.wo, w.bo, y + b * T * D);
  }
}

void attention_backward(const AttentionDims& d, const double* x, const AttentionWeights& w,
                        const AttentionCache& cache, const double* dy, double* dx, const AttentionGrads* grads) {
  const std::size_t T = d.time, D = d.model_dim, H = d.heads, dh = d.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t wsize = D * D;
  // Per-sample gradient block layout: wq wk wv wo (D*D each) then bq bk bv bo (D each).
  const std::size_t block = grads ? 4 * wsize + 4 * D : 0;
  std::vector<double> partial(d.batch * block, 0.0);
  const bool par = worth_parallel(d.batch * T * D * (8 * D + 4 * T));
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t b = 0; b < d.batch; ++b) {
    const double* xb = x + b * T * D;
    const double* q = &cache.q[b * T * D];
    const double* k = &cache.k[b * T * D];
    const double* v = &cache.v[b * T * D];
    const double* ctx = &cache.context[b * T * D];
    double* pb = grads ? &partial[b * block] : nullptr;
    double* gwq = pb ? pb : nullptr;
    double* gwk = pb ? pb + wsize : nullptr;
    double* gwv = pb ? pb + 2 * wsize : nullptr;
    double* gwo = pb ? pb + 3 * wsize : nullptr;
    double* gbq = pb ? pb + 4 * wsize : nullptr;
    double* gbk = pb ? pb + 4 * wsize + D : nullptr;
    double* gbv = pb ? pb + 4 * wsize + 2 * D : nullptr;
    double* gbo = pb ? pb + 4 * wsize + 3 * D : nullptr;

    std::vector<double> dctx(T * D, 0.0), dq(T * D, 0.0), dk(T * D, 0.0), dv(T * D, 0.0), dp(T);
    project_backward(T, D, ctx, w.wo, dy + b * T * D, dctx.data(), gwo, gbo);
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t t = 0; t < T; ++t) {
        const double* p = &cache.probs[((b * H + h) * T + t) * T];
        const double* gc = &dctx[t * D + off];
        double weighted = 0.0;
        for (std::size_t u = 0; u < T; ++u) {
          dp[u] = dot(gc, v + u * D + off, dh);
          weighted += p[u] * dp[u];
          axpy(p[u], gc, &dv[u * D + off], dh);
        }
        for (std::size_t u = 0; u < T; ++u) {
          const double ds = p[u] * (dp[u] - weighted) * scale;
          if (ds == 0.0) continue;
          axpy(ds, k + u * D + off, &dq[t * D + off], dh);
          axpy(ds, q + t * D + off, &dk[u * D + off], dh);
        }
      }
    }
    double* dxb = dx ? dx + b * T * D : nullptr;
    project_backward(T, D, xb, w.wq, dq.data(), dxb, gwq, gbq);
    project_backward(T, D, xb, w.wk, dk.data(), dxb, gwk, gbk);
    project_backward(T, D, xb, w.wv, dv.data(), dxb, gwv, gbv);
  }
  if (!grads) return;
  // Gather partial blocks back onto the caller's buffers.
  std::vector<double> summed(block, 0.0);
  reduce_partials(partial, d.batch, block, summed.data());
  auto add = [&](double* dst, std::size_t offset, std::size_t n) {
    if (!dst) return;
    for (std::size_t i = 0; i < n; ++i) dst[i] += summed[offset + i];
  };
  add(grads->wq, 0, wsize);
  add(grads->wk, wsize, wsize);
  add(grads->wv, 2 * wsize, wsize);
  add(grads->wo, 3 * wsize, wsize);
  add(grads->bq, 4 * wsize, D);
  add(grads->bk, 4 * wsize + D, D);
  add(grads->bv, 4 * wsize + 2 * D, D);
  add(grads->bo, 4 * wsize + 3 * D, D);
}

void lstm_forward(const LstmDims& d, const double* x, const double* wx, const double* wh, const double* bias,
                  bool reverse, double* y, LstmCache& cache) {
  const std::size_t T = d.time, D = d.input, H = d.hidden, G = 4 * H;
  cache.gates.assign(d.batch * T * G, 0.0);
  cache.cells.assign(d.batch * T * H, 0.0);
  cache.hidden.assign(d.batch * T * H, 0.0);
  const bool par = worth_parallel(d.batch * T * G * (D + H));
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t b = 0; b < d.batch; ++b) {
    // Input contributions for every step in one pass; the recurrence adds wh*h.
    std::vector<double> z(T * G);
    for (std::size_t t = 0; t < T; ++t) {
      const double* xt = x + (b * T + t) * D;
      for (std::size_t r = 0; r < G; ++r) z[t * G + r] = bias[r] + dot(wx + r * D, xt, D);
    }
    std::vector<double> h(H, 0.0), c(H, 0.0);
    for (std::size_t s = 0; s < T; ++s) {
      const std::size_t t = reverse ? T - 1 - s : s;
      double* zt = &z[t * G];
      for (std::size_t r = 0; r < G; ++r) zt[r] += dot(wh + r * H, h.data(), H);
      double* gate = &cache.gates[(b * T + t) * G];
      for (std::size_t j = 0; j < H; ++j) {
        const double ig = sigmoid(zt[j]);
        const double fg = sigmoid(zt[H + j]);
        const double gg = std::tanh(zt[2 * H + j]);
        const double og = sigmoid(zt[3 * H + j]);
        gate[j] = ig;
        gate[H + j] = fg;
        gate[2 * H + j] = gg;
        gate[3 * H + j] = og;
        c[j] = fg * c[j] + ig * gg;
        h[j] = og * std::tanh(c[j]);
      }
      std::copy(c.begin(), c.end(), &cache.cells[(b * T + t) * H]);
      std::copy(h.begin(), h.end(), &cache.hidden[(b * T + t) * H]);
      std::copy(h.begin(), h.end(), y + (b * T + t) * H);
    }
  }
}

void lstm_backward(const LstmDims& d, const double* x, const double* wx, const double* wh, bool reverse,
                   const LstmCache& cache, const double* dy, double* dx, double* dwx, double* dwh,
                   double* dbias) {
  const std::size_t T = d.time, D = d.input, H = d.hidden, G = 4 * H;
  const bool want_weights = dwx || dwh || dbias;
  const std::size_t block = want_weights ? G * D + G * H + G : 0;
  std::vector<double> partial(d.batch * block, 0.0);
  const bool par = worth_parallel(d.batch * T * G * (D + H));
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t b = 0; b < d.batch; ++b) {
    std::vector<double> dz(T * G, 0.0), dh_next(H, 0.0), dc_next(H, 0.0);
    const double* zero_h = nullptr;
    std::vector<double> zeros(H, 0.0);
    zero_h = zeros.data();
    for (std::size_t s = T; s-- > 0;) {
      const std::size_t t = reverse ? T - 1 - s : s;
      const bool has_prev = s > 0;
      const std::size_t tp = has_prev ? (reverse ? t + 1 : t - 1) : 0;
      const double* gate = &cache.gates[(b * T + t) * G];
      const double* cells = &cache.cells[(b * T + t) * H];
      const double* cprev = has_prev ? &cache.cells[(b * T + tp) * H] : zero_h;
      double* dzt = &dz[t * G];
      for (std::size_t j = 0; j < H; ++j) {
        const double ig = gate[j], fg = gate[H + j], gg = gate[2 * H + j], og = gate[3 * H + j];
        const double tc = std::tanh(cells[j]);
        const double dh = dy[(b * T + t) * H + j] + dh_next[j];
        const double dc = dh * og * (1.0 - tc * tc) + dc_next[j];
        dzt[j] = dc * gg * ig * (1.0 - ig);
        dzt[H + j] = dc * cprev[j] * fg * (1.0 - fg);
        dzt[2 * H + j] = dc * ig * (1.0 - gg * gg);
        dzt[3 * H + j] = dh * tc * og * (1.0 - og);
        dc_next[j] = dc * fg;
      }
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      for (std::size_t r = 0; r < G; ++r) {
        if (dzt[r] != 0.0) axpy(dzt[r], wh + r * H, dh_next.data(), H);
      }
    }
    double* pb = want_weights ? &partial[b * block] : nullptr;
    for (std::size_t t = 0; t < T; ++t) {
      const double* dzt = &dz[t * G];
      const double* xt = x + (b * T + t) * D;
      const bool has_prev = reverse ? t + 1 < T : t > 0;
      const double* hprev = has_prev ? &cache.hidden[(b * T + (reverse ? t + 1 : t - 1)) * H] : zero_h;
      for (std::size_t r = 0; r < G; ++r) {
        const double g = dzt[r];
        if (g == 0.0) continue;
        if (pb) {
          axpy(g, xt, pb + r * D, D);
          axpy(g, hprev, pb + G * D + r * H, H);
          pb[G * D + G * H + r] += g;
        }
        if (dx) axpy(g, wx + r * D, dx + (b * T + t) * D, D);
      }
    }
  }
  if (!want_weights) return;
  std::vector<double> summed(block, 0.0);
  reduce_partials(partial, d.batch, block, summed.data());
  if (dwx) axpy(1.0, summed.data(), dwx, G * D);
  if (dwh) axpy(1.0, summed.data() + G * D, dwh, G * H);
  if (dbias) axpy(1.0, summed.data() + G * D + G * H, dbias, G);
}

}  // namespace mmfuse::kernels
