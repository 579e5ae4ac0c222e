// Serial reference kernels: direct transcriptions of the layer definitions.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mmfuse/numerics/kernels.hpp"

namespace mmfuse::kernels::reference {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

void conv1d_forward(const Conv1dDims& d, const double* x, const double* w, const double* bias, double* y) {
  const std::size_t out_t = d.out_time();
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t t = 0; t < out_t; ++t) {
      for (std::size_t j = 0; j < d.out_channels; ++j) {
        double acc = bias ? bias[j] : 0.0;
        for (std::size_t tau = 0; tau < d.kernel; ++tau) {
          for (std::size_t c = 0; c < d.in_channels; ++c) {
            acc += x[(b * d.time + t * d.stride + tau) * d.in_channels + c] *
                   w[(j * d.in_channels + c) * d.kernel + tau];
          }
        }
        y[(b * out_t + t) * d.out_channels + j] = acc;
      }
    }
  }
}

void conv1d_backward(const Conv1dDims& d, const double* x, const double* w, const double* dy, double* dx,
                     double* dw, double* dbias) {
  const std::size_t out_t = d.out_time();
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t t = 0; t < out_t; ++t) {
      for (std::size_t j = 0; j < d.out_channels; ++j) {
        const double g = dy[(b * out_t + t) * d.out_channels + j];
        if (dbias) dbias[j] += g;
        for (std::size_t tau = 0; tau < d.kernel; ++tau) {
          for (std::size_t c = 0; c < d.in_channels; ++c) {
            const std::size_t xi = (b * d.time + t * d.stride + tau) * d.in_channels + c;
            const std::size_t wi = (j * d.in_channels + c) * d.kernel + tau;
            if (dw) dw[wi] += g * x[xi];
            if (dx) dx[xi] += g * w[wi];
          }
        }
      }
    }
  }
}

void linear_forward(const LinearDims& d, const double* x, const double* w, const double* bias, double* y) {
  for (std::size_t n = 0; n < d.rows; ++n) {
    for (std::size_t o = 0; o < d.out; ++o) {
      double acc = bias ? bias[o] : 0.0;
      for (std::size_t i = 0; i < d.in; ++i) acc += x[n * d.in + i] * w[o * d.in + i];
      y[n * d.out + o] = acc;
    }
  }
}

void linear_backward(const LinearDims& d, const double* x, const double* w, const double* dy, double* dx,
                     double* dw, double* dbias) {
  for (std::size_t n = 0; n < d.rows; ++n) {
    for (std::size_t o = 0; o < d.out; ++o) {
      const double g = dy[n * d.out + o];
      if (dbias) dbias[o] += g;
      for (std::size_t i = 0; i < d.in; ++i) {
        if (dw) dw[o * d.in + i] += g * x[n * d.in + i];
        if (dx) dx[n * d.in + i] += g * w[o * d.in + i];
      }
    }
  }
}

void attention_forward(const AttentionDims& d, const double* x, const AttentionWeights& w, double* y,
                       AttentionCache& cache) {
  const std::size_t T = d.time, D = d.model_dim, H = d.heads, dh = d.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.q.assign(d.batch * T * D, 0.0);
  cache.k.assign(d.batch * T * D, 0.0);
  cache.v.assign(d.batch * T * D, 0.0);
  cache.context.assign(d.batch * T * D, 0.0);
  cache.probs.assign(d.batch * H * T * T, 0.0);
  const LinearDims proj{d.batch * T, D, D};
  reference::linear_forward(proj, x, w.wq, w.bq, cache.q.data());
  reference::linear_forward(proj, x, w.wk, w.bk, cache.k.data());
  reference::linear_forward(proj, x, w.wv, w.bv, cache.v.data());
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> scores(T);
        for (std::size_t u = 0; u < T; ++u) {
          double s = 0.0;
          for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
            s += cache.q[(b * T + t) * D + c] * cache.k[(b * T + u) * D + c];
          }
          scores[u] = s * scale;
        }
        const double mx = *std::max_element(scores.begin(), scores.end());
        double total = 0.0;
        for (double& s : scores) {
          s = std::exp(s - mx);
          total += s;
        }
        for (std::size_t u = 0; u < T; ++u) {
          const double p = scores[u] / total;
          cache.probs[((b * H + h) * T + t) * T + u] = p;
          for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
            cache.context[(b * T + t) * D + c] += p * cache.v[(b * T + u) * D + c];
          }
        }
      }
    }
  }
  reference::linear_forward(proj, cache.context.data(), w.wo, w.bo, y);
}

void attention_backward(const AttentionDims& d, const double* x, const AttentionWeights& w,
                        const AttentionCache& cache, const double* dy, double* dx, const AttentionGrads* grads) {
  const std::size_t T = d.time, D = d.model_dim, H = d.heads, dh = d.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t n = d.batch * T * D;
  const LinearDims proj{d.batch * T, D, D};
  std::vector<double> dctx(n, 0.0), dq(n, 0.0), dk(n, 0.0), dv(n, 0.0);
  reference::linear_backward(proj, cache.context.data(), w.wo, dy, dctx.data(), grads ? grads->wo : nullptr,
                  grads ? grads->bo : nullptr);
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t t = 0; t < T; ++t) {
        const double* p = &cache.probs[((b * H + h) * T + t) * T];
        std::vector<double> dp(T, 0.0);
        for (std::size_t u = 0; u < T; ++u) {
          for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
            dp[u] += dctx[(b * T + t) * D + c] * cache.v[(b * T + u) * D + c];
            dv[(b * T + u) * D + c] += p[u] * dctx[(b * T + t) * D + c];
          }
        }
        double dot = 0.0;
        for (std::size_t u = 0; u < T; ++u) dot += p[u] * dp[u];
        for (std::size_t u = 0; u < T; ++u) {
          const double ds = p[u] * (dp[u] - dot) * scale;
          for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
            dq[(b * T + t) * D + c] += ds * cache.k[(b * T + u) * D + c];
            dk[(b * T + u) * D + c] += ds * cache.q[(b * T + t) * D + c];
          }
        }
      }
    }
  }
  reference::linear_backward(proj, x, w.wq, dq.data(), dx, grads ? grads->wq : nullptr, grads ? grads->bq : nullptr);
  reference::linear_backward(proj, x, w.wk, dk.data(), dx, grads ? grads->wk : nullptr, grads ? grads->bk : nullptr);
  reference::linear_backward(proj, x, w.wv, dv.data(), dx, grads ? grads->wv : nullptr, grads ? grads->bv : nullptr);
}

void lstm_forward(const LstmDims& d, const double* x, const double* wx, const double* wh, const double* bias,
                  bool reverse, double* y, LstmCache& cache) {
  const std::size_t T = d.time, D = d.input, H = d.hidden;
  cache.gates.assign(d.batch * T * 4 * H, 0.0);
  cache.cells.assign(d.batch * T * H, 0.0);
  cache.hidden.assign(d.batch * T * H, 0.0);
  for (std::size_t b = 0; b < d.batch; ++b) {
    std::vector<double> h(H, 0.0), c(H, 0.0), z(4 * H);
    for (std::size_t s = 0; s < T; ++s) {
      const std::size_t t = reverse ? T - 1 - s : s;
      for (std::size_t r = 0; r < 4 * H; ++r) {
        double acc = bias[r];
        for (std::size_t i = 0; i < D; ++i) acc += wx[r * D + i] * x[(b * T + t) * D + i];
        for (std::size_t i = 0; i < H; ++i) acc += wh[r * H + i] * h[i];
        z[r] = acc;
      }
      double* gate = &cache.gates[(b * T + t) * 4 * H];
      for (std::size_t j = 0; j < H; ++j) {
        const double ig = sigmoid(z[j]);
        const double fg = sigmoid(z[H + j]);
        const double gg = std::tanh(z[2 * H + j]);
        const double og = sigmoid(z[3 * H + j]);
        gate[j] = ig;
        gate[H + j] = fg;
        gate[2 * H + j] = gg;
        gate[3 * H + j] = og;
        c[j] = fg * c[j] + ig * gg;
        h[j] = og * std::tanh(c[j]);
        cache.cells[(b * T + t) * H + j] = c[j];
        cache.hidden[(b * T + t) * H + j] = h[j];
        y[(b * T + t) * H + j] = h[j];
      }
    }
  }
}

void lstm_backward(const LstmDims& d, const double* x, const double* wx, const double* wh, bool reverse,
                   const LstmCache& cache, const double* dy, double* dx, double* dwx, double* dwh,
                   double* dbias) {
  const std::size_t T = d.time, D = d.input, H = d.hidden;
  for (std::size_t b = 0; b < d.batch; ++b) {
    std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dz(4 * H);
    for (std::size_t s = T; s-- > 0;) {
      const std::size_t t = reverse ? T - 1 - s : s;
      const bool has_prev = s > 0;
      const std::size_t tp = has_prev ? (reverse ? t + 1 : t - 1) : 0;
      const double* gate = &cache.gates[(b * T + t) * 4 * H];
      for (std::size_t j = 0; j < H; ++j) {
        const double ig = gate[j], fg = gate[H + j], gg = gate[2 * H + j], og = gate[3 * H + j];
        const double c = cache.cells[(b * T + t) * H + j];
        const double c_prev = has_prev ? cache.cells[(b * T + tp) * H + j] : 0.0;
        const double tc = std::tanh(c);
        const double dh = dy[(b * T + t) * H + j] + dh_next[j];
        const double dc = dh * og * (1.0 - tc * tc) + dc_next[j];
        dz[j] = dc * gg * ig * (1.0 - ig);
        dz[H + j] = dc * c_prev * fg * (1.0 - fg);
        dz[2 * H + j] = dc * ig * (1.0 - gg * gg);
        dz[3 * H + j] = dh * tc * og * (1.0 - og);
        dc_next[j] = dc * fg;
      }
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      for (std::size_t r = 0; r < 4 * H; ++r) {
        if (dbias) dbias[r] += dz[r];
        for (std::size_t i = 0; i < D; ++i) {
          if (dwx) dwx[r * D + i] += dz[r] * x[(b * T + t) * D + i];
          if (dx) dx[(b * T + t) * D + i] += dz[r] * wx[r * D + i];
        }
        for (std::size_t i = 0; i < H; ++i) {
          const double hp = has_prev ? cache.hidden[(b * T + tp) * H + i] : 0.0;
          if (dwh) dwh[r * H + i] += dz[r] * hp;
          dh_next[i] += dz[r] * wh[r * H + i];
        }
      }
    }
  }
}

}  // namespace mmfuse::kernels::reference
