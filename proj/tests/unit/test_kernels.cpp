#include <doctest.h>

#include <cmath>

#include "mmfuse/numerics/kernels.hpp"
#include "support.hpp"

using namespace mmfuse;
namespace k = mmfuse::kernels;

namespace {

std::vector<double> rand_vec(std::size_t n, RngStream& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1, 1);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("parallel conv1d matches the serial reference") {
    RngStream rng(1);
    const k::Conv1dDims d{3, 17, 5, 4, 3, 2};
    const auto x = rand_vec(d.batch * d.time * d.in_channels, rng);
    const auto w = rand_vec(d.out_channels * d.in_channels * d.kernel, rng);
    const auto b = rand_vec(d.out_channels, rng);
    const auto dy = rand_vec(d.batch * d.out_time() * d.out_channels, rng);
    std::vector<double> y1(dy.size()), y2(dy.size());
    k::conv1d_forward(d, x.data(), w.data(), b.data(), y1.data());
    k::reference::conv1d_forward(d, x.data(), w.data(), b.data(), y2.data());
    CHECK(max_abs_diff(y1, y2) < 1e-12);
    std::vector<double> dx1(x.size()), dx2(x.size()), dw1(w.size()), dw2(w.size()), db1(b.size()), db2(b.size());
    k::conv1d_backward(d, x.data(), w.data(), dy.data(), dx1.data(), dw1.data(), db1.data());
    k::reference::conv1d_backward(d, x.data(), w.data(), dy.data(), dx2.data(), dw2.data(), db2.data());
    CHECK(max_abs_diff(dx1, dx2) < 1e-12);
    CHECK(max_abs_diff(dw1, dw2) < 1e-12);
    CHECK(max_abs_diff(db1, db2) < 1e-12);
  }

  TEST_CASE("parallel linear matches the serial reference") {
    RngStream rng(2);
    const k::LinearDims d{7, 5, 4};
    const auto x = rand_vec(d.rows * d.in, rng), w = rand_vec(d.out * d.in, rng), b = rand_vec(d.out, rng);
    const auto dy = rand_vec(d.rows * d.out, rng);
    std::vector<double> y1(dy.size()), y2(dy.size());
    k::linear_forward(d, x.data(), w.data(), b.data(), y1.data());
    k::reference::linear_forward(d, x.data(), w.data(), b.data(), y2.data());
    CHECK(max_abs_diff(y1, y2) < 1e-12);
    std::vector<double> dx1(x.size()), dx2(x.size()), dw1(w.size()), dw2(w.size()), db1(4), db2(4);
    k::linear_backward(d, x.data(), w.data(), dy.data(), dx1.data(), dw1.data(), db1.data());
    k::reference::linear_backward(d, x.data(), w.data(), dy.data(), dx2.data(), dw2.data(), db2.data());
    CHECK(max_abs_diff(dx1, dx2) < 1e-12);
    CHECK(max_abs_diff(dw1, dw2) < 1e-12);
    CHECK(max_abs_diff(db1, db2) < 1e-12);
  }

  TEST_CASE("parallel attention matches the serial reference") {
    RngStream rng(3);
    const k::AttentionDims d{2, 5, 6, 3};
    const std::size_t D = d.model_dim;
    const auto x = rand_vec(d.batch * d.time * D, rng);
    std::vector<std::vector<double>> p;
    for (int i = 0; i < 4; ++i) {
      p.push_back(rand_vec(D * D, rng));
      p.push_back(rand_vec(D, rng));
    }
    const k::AttentionWeights w{p[0].data(), p[1].data(), p[2].data(), p[3].data(),
                                p[4].data(), p[5].data(), p[6].data(), p[7].data()};
    std::vector<double> y1(x.size()), y2(x.size());
    k::AttentionCache c1, c2;
    k::attention_forward(d, x.data(), w, y1.data(), c1);
    k::reference::attention_forward(d, x.data(), w, y2.data(), c2);
    CHECK(max_abs_diff(y1, y2) < 1e-12);
    const auto dy = rand_vec(x.size(), rng);
    std::vector<std::vector<double>> g1, g2;
    for (const auto& v : p) {
      g1.emplace_back(v.size(), 0.0);
      g2.emplace_back(v.size(), 0.0);
    }
    const k::AttentionGrads a1{g1[0].data(), g1[1].data(), g1[2].data(), g1[3].data(),
                               g1[4].data(), g1[5].data(), g1[6].data(), g1[7].data()};
    const k::AttentionGrads a2{g2[0].data(), g2[1].data(), g2[2].data(), g2[3].data(),
                               g2[4].data(), g2[5].data(), g2[6].data(), g2[7].data()};
    std::vector<double> dx1(x.size()), dx2(x.size());
    k::attention_backward(d, x.data(), w, c1, dy.data(), dx1.data(), &a1);
    k::reference::attention_backward(d, x.data(), w, c2, dy.data(), dx2.data(), &a2);
    CHECK(max_abs_diff(dx1, dx2) < 1e-12);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(max_abs_diff(g1[i], g2[i]) < 1e-12);
  }

  TEST_CASE("parallel lstm matches the serial reference in both directions") {
    RngStream rng(4);
    const k::LstmDims d{3, 6, 4, 3};
    const auto x = rand_vec(d.batch * d.time * d.input, rng);
    const auto wx = rand_vec(4 * d.hidden * d.input, rng), wh = rand_vec(4 * d.hidden * d.hidden, rng);
    const auto b = rand_vec(4 * d.hidden, rng);
    const auto dy = rand_vec(d.batch * d.time * d.hidden, rng);
    for (bool reverse : {false, true}) {
      std::vector<double> y1(dy.size()), y2(dy.size());
      k::LstmCache c1, c2;
      k::lstm_forward(d, x.data(), wx.data(), wh.data(), b.data(), reverse, y1.data(), c1);
      k::reference::lstm_forward(d, x.data(), wx.data(), wh.data(), b.data(), reverse, y2.data(), c2);
      CHECK(max_abs_diff(y1, y2) < 1e-12);
      std::vector<double> dx1(x.size()), dx2(x.size()), dwx1(wx.size()), dwx2(wx.size()), dwh1(wh.size()),
          dwh2(wh.size()), db1(b.size()), db2(b.size());
      k::lstm_backward(d, x.data(), wx.data(), wh.data(), reverse, c1, dy.data(), dx1.data(), dwx1.data(),
                       dwh1.data(), db1.data());
      k::reference::lstm_backward(d, x.data(), wx.data(), wh.data(), reverse, c2, dy.data(), dx2.data(),
                                  dwx2.data(), dwh2.data(), db2.data());
      CHECK(max_abs_diff(dx1, dx2) < 1e-12);
      CHECK(max_abs_diff(dwx1, dwx2) < 1e-12);
      CHECK(max_abs_diff(dwh1, dwh2) < 1e-12);
      CHECK(max_abs_diff(db1, db2) < 1e-12);
    }
  }
}
