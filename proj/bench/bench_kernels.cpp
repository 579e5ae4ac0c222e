// Serial reference kernels vs the OpenMP versions on encoder-, fusion- and
// baseline-sized problems. Run with OMP_NUM_THREADS to vary the thread count.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mmfuse/numerics/kernels.hpp"

namespace k = mmfuse::kernels;

namespace {

std::vector<double> filled(std::size_t n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 0.1);
  std::vector<double> v(n);
  for (double& x : v) x = dist(gen);
  return v;
}

// First encoder layer on the 123-wide audio stream.
const k::Conv1dDims kConv{32, 100, 123, 64, 5, 2};

template <bool Ref>
void BM_Conv1dForward(benchmark::State& state) {
  const auto x = filled(kConv.batch * kConv.time * kConv.in_channels, 1);
  const auto w = filled(kConv.out_channels * kConv.in_channels * kConv.kernel, 2);
  const auto b = filled(kConv.out_channels, 3);
  std::vector<double> y(kConv.batch * kConv.out_time() * kConv.out_channels);
  for (auto _ : state) {
    if constexpr (Ref) k::reference::conv1d_forward(kConv, x.data(), w.data(), b.data(), y.data());
    else k::conv1d_forward(kConv, x.data(), w.data(), b.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Ref>
void BM_Conv1dBackward(benchmark::State& state) {
  const auto x = filled(kConv.batch * kConv.time * kConv.in_channels, 1);
  const auto w = filled(kConv.out_channels * kConv.in_channels * kConv.kernel, 2);
  const auto dy = filled(kConv.batch * kConv.out_time() * kConv.out_channels, 4);
  std::vector<double> dx(x.size()), dw(w.size()), db(kConv.out_channels);
  for (auto _ : state) {
    if constexpr (Ref) k::reference::conv1d_backward(kConv, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    else k::conv1d_backward(kConv, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    benchmark::DoNotOptimize(dx.data());
  }
}

const k::LinearDims kLinear{32 * 23, 128, 128};

template <bool Ref>
void BM_LinearForward(benchmark::State& state) {
  const auto x = filled(kLinear.rows * kLinear.in, 1);
  const auto w = filled(kLinear.out * kLinear.in, 2);
  const auto b = filled(kLinear.out, 3);
  std::vector<double> y(kLinear.rows * kLinear.out);
  for (auto _ : state) {
    if constexpr (Ref) k::reference::linear_forward(kLinear, x.data(), w.data(), b.data(), y.data());
    else k::linear_forward(kLinear, x.data(), w.data(), b.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

// Fusion block over 23 fused frames of width 48.
const k::AttentionDims kAttn{32, 23, 48, 4};

struct AttnFixture {
  std::vector<double> x, wq, bq, wk, bk, wv, bv, wo, bo, y, dy, dx;
  std::vector<double> gq, gbq, gk, gbk, gv, gbv, go, gbo;
  AttnFixture() {
    const std::size_t D = kAttn.model_dim, n = kAttn.batch * kAttn.time * D;
    x = filled(n, 1);
    dy = filled(n, 2);
    wq = filled(D * D, 3), wk = filled(D * D, 4), wv = filled(D * D, 5), wo = filled(D * D, 6);
    bq = filled(D, 7), bk = filled(D, 8), bv = filled(D, 9), bo = filled(D, 10);
    y.assign(n, 0), dx.assign(n, 0);
    gq.assign(D * D, 0), gk.assign(D * D, 0), gv.assign(D * D, 0), go.assign(D * D, 0);
    gbq.assign(D, 0), gbk.assign(D, 0), gbv.assign(D, 0), gbo.assign(D, 0);
  }
  k::AttentionWeights weights() const {
    return {wq.data(), bq.data(), wk.data(), bk.data(), wv.data(), bv.data(), wo.data(), bo.data()};
  }
  k::AttentionGrads grads() {
    return {gq.data(), gbq.data(), gk.data(), gbk.data(), gv.data(), gbv.data(), go.data(), gbo.data()};
  }
};

template <bool Ref>
void BM_AttentionForwardBackward(benchmark::State& state) {
  AttnFixture f;
  k::AttentionCache cache;
  const auto w = f.weights();
  auto g = f.grads();
  for (auto _ : state) {
    if constexpr (Ref) {
      k::reference::attention_forward(kAttn, f.x.data(), w, f.y.data(), cache);
      k::reference::attention_backward(kAttn, f.x.data(), w, cache, f.dy.data(), f.dx.data(), &g);
    } else {
      k::attention_forward(kAttn, f.x.data(), w, f.y.data(), cache);
      k::attention_backward(kAttn, f.x.data(), w, cache, f.dy.data(), f.dx.data(), &g);
    }
    benchmark::DoNotOptimize(f.dx.data());
  }
}

// Baseline LSTM over the raw audio stream.
const k::LstmDims kLstm{32, 100, 123, 32};

template <bool Ref>
void BM_LstmForwardBackward(benchmark::State& state) {
  const std::size_t G = 4 * kLstm.hidden;
  const auto x = filled(kLstm.batch * kLstm.time * kLstm.input, 1);
  const auto wx = filled(G * kLstm.input, 2);
  const auto wh = filled(G * kLstm.hidden, 3);
  const auto bias = filled(G, 4);
  const auto dy = filled(kLstm.batch * kLstm.time * kLstm.hidden, 5);
  std::vector<double> y(dy.size()), dx(x.size()), dwx(wx.size()), dwh(wh.size()), db(G);
  k::LstmCache cache;
  for (auto _ : state) {
    if constexpr (Ref) {
      k::reference::lstm_forward(kLstm, x.data(), wx.data(), wh.data(), bias.data(), false, y.data(), cache);
      k::reference::lstm_backward(kLstm, x.data(), wx.data(), wh.data(), false, cache, dy.data(), dx.data(),
                                  dwx.data(), dwh.data(), db.data());
    } else {
      k::lstm_forward(kLstm, x.data(), wx.data(), wh.data(), bias.data(), false, y.data(), cache);
      k::lstm_backward(kLstm, x.data(), wx.data(), wh.data(), false, cache, dy.data(), dx.data(), dwx.data(),
                       dwh.data(), db.data());
    }
    benchmark::DoNotOptimize(dx.data());
  }
}

}  // namespace

BENCHMARK(BM_Conv1dForward<true>)->Name("conv1d_forward/reference")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Conv1dForward<false>)->Name("conv1d_forward/openmp")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Conv1dBackward<true>)->Name("conv1d_backward/reference")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Conv1dBackward<false>)->Name("conv1d_backward/openmp")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LinearForward<true>)->Name("linear_forward/reference")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LinearForward<false>)->Name("linear_forward/openmp")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_AttentionForwardBackward<true>)->Name("attention/reference")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_AttentionForwardBackward<false>)->Name("attention/openmp")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LstmForwardBackward<true>)->Name("lstm/reference")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LstmForwardBackward<false>)->Name("lstm/openmp")->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
