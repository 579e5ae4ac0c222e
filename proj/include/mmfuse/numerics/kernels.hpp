#pragma once

// Raw compute kernels behind the differentiable ops.
//
// Two implementations share these signatures:
//   mmfuse::kernels            OpenMP-parallel, cache-friendly layouts
//   mmfuse::kernels::reference serial nested loops written straight from the
//                              definitions, kept for testing and benchmarking
//
// Parallel kernels only split work over disjoint outputs and reduce
// per-sample partials in a fixed order, so results do not depend on the
// thread count. Backward kernels accumulate (+=) into every non-null output.

#include <cstddef>
#include <vector>

namespace mmfuse::kernels {

struct Conv1dDims {
  std::size_t batch;
  std::size_t time;
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t kernel;
  std::size_t stride;
  std::size_t out_time() const { return (time - kernel) / stride + 1; }
};

struct LinearDims {
  std::size_t rows;
  std::size_t in;
  std::size_t out;
};

struct AttentionDims {
  std::size_t batch;
  std::size_t time;
  std::size_t model_dim;
  std::size_t heads;
  std::size_t head_dim() const { return model_dim / heads; }
};

// Projection weights are [model_dim, model_dim] (out x in); head h owns rows
// [h*head_dim, (h+1)*head_dim) of the query/key/value projections.
struct AttentionWeights {
  const double* wq;
  const double* bq;
  const double* wk;
  const double* bk;
  const double* wv;
  const double* bv;
  const double* wo;
  const double* bo;
};

struct AttentionGrads {
  double* wq;
  double* bq;
  double* wk;
  double* bk;
  double* wv;
  double* bv;
  double* wo;
  double* bo;
};

// Saved forward activations: q/k/v/context are [B,T,d], probs is [B,h,T,T].
struct AttentionCache {
  std::vector<double> q, k, v, probs, context;
};

struct LstmDims {
  std::size_t batch;
  std::size_t time;
  std::size_t input;
  std::size_t hidden;
};

// Gate order i, f, g, o. gates holds activated values [B,T,4H]; cells and
// hidden are [B,T,H] indexed by time step in sequence order.
struct LstmCache {
  std::vector<double> gates, cells, hidden;
};

void conv1d_forward(const Conv1dDims& d, const double* x, const double* w, const double* bias, double* y);
void conv1d_backward(const Conv1dDims& d, const double* x, const double* w, const double* dy, double* dx,
                     double* dw, double* dbias);

void linear_forward(const LinearDims& d, const double* x, const double* w, const double* bias, double* y);
void linear_backward(const LinearDims& d, const double* x, const double* w, const double* dy, double* dx,
                     double* dw, double* dbias);

void attention_forward(const AttentionDims& d, const double* x, const AttentionWeights& w, double* y,
                       AttentionCache& cache);
void attention_backward(const AttentionDims& d, const double* x, const AttentionWeights& w,
                        const AttentionCache& cache, const double* dy, double* dx, const AttentionGrads* grads);

void lstm_forward(const LstmDims& d, const double* x, const double* wx, const double* wh, const double* bias,
                  bool reverse, double* y, LstmCache& cache);
void lstm_backward(const LstmDims& d, const double* x, const double* wx, const double* wh, bool reverse,
                   const LstmCache& cache, const double* dy, double* dx, double* dwx, double* dwh,
                   double* dbias);

namespace reference {

void conv1d_forward(const Conv1dDims& d, const double* x, const double* w, const double* bias, double* y);
void conv1d_backward(const Conv1dDims& d, const double* x, const double* w, const double* dy, double* dx,
                     double* dw, double* dbias);

void linear_forward(const LinearDims& d, const double* x, const double* w, const double* bias, double* y);
void linear_backward(const LinearDims& d, const double* x, const double* w, const double* dy, double* dx,
                     double* dw, double* dbias);

void attention_forward(const AttentionDims& d, const double* x, const AttentionWeights& w, double* y,
                       AttentionCache& cache);
void attention_backward(const AttentionDims& d, const double* x, const AttentionWeights& w,
                        const AttentionCache& cache, const double* dy, double* dx, const AttentionGrads* grads);

void lstm_forward(const LstmDims& d, const double* x, const double* wx, const double* wh, const double* bias,
                  bool reverse, double* y, LstmCache& cache);
void lstm_backward(const LstmDims& d, const double* x, const double* wx, const double* wh, bool reverse,
                   const LstmCache& cache, const double* dy, double* dx, double* dwx, double* dwh,
                   double* dbias);

}  // namespace reference

}  // namespace mmfuse::kernels
