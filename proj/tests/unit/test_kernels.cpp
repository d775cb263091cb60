#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ringfree/kernels.hpp"

using namespace ringfree;
using kernels::Exec;

namespace {

std::vector<double> uniform(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double scale = 0.0, worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    scale = std::max(scale, std::abs(b[k]));
    worst = std::max(worst, std::abs(a[k] - b[k]));
  }
  return worst / std::max(scale, 1e-300);
}

struct Net {
  std::vector<std::size_t> widths;
  std::vector<std::vector<double>> w, b;
  std::vector<std::span<const double>> ws, bs;

  Net(std::vector<std::size_t> wd, std::uint64_t seed) : widths(std::move(wd)) {
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const double bound = std::sqrt(6.0 / static_cast<double>(widths[l]));
      w.push_back(uniform(widths[l] * widths[l + 1], seed + l, -bound, bound));
      b.push_back(uniform(widths[l + 1], seed + 100 + l, -0.1, 0.1));
    }
    for (std::size_t l = 0; l < w.size(); ++l) {
      ws.emplace_back(w[l]);
      bs.emplace_back(b[l]);
    }
  }
  kernels::MlpView view() const { return {widths, ws, bs}; }
};

struct Grads {
  std::vector<double> gx;
  std::vector<std::vector<double>> gw, gb;
  std::vector<std::span<double>> gws, gbs;
  Grads(const Net& net, std::size_t rows) : gx(rows * net.widths.front(), 0.0) {
    for (std::size_t l = 0; l < net.w.size(); ++l) {
      gw.emplace_back(net.w[l].size(), 0.0);
      gb.emplace_back(net.b[l].size(), 0.0);
    }
    for (std::size_t l = 0; l < gw.size(); ++l) {
      gws.emplace_back(gw[l]);
      gbs.emplace_back(gb[l]);
    }
  }
};

template <class T>
void run_mlp(const Net& net, const std::vector<double>& x, const std::vector<double>& gy,
             std::size_t rows, Exec exec, std::vector<double>& y, Grads& g) {
  const auto view = net.view();
  std::vector<T> hidden(kernels::mlp_hidden_size(view, rows));
  y.assign(rows * net.widths.back(), 0.0);
  kernels::mlp_forward<T>(view, x, hidden, y, rows, exec);
  kernels::mlp_backward<T>(view, x, std::span<const T>(hidden), gy, g.gx, g.gws, g.gbs, rows, exec);
}

}  // namespace

TEST_CASE("dense serial and parallel agree") {
  const std::size_t rows = 9001, in = 6, out = 64;
  const auto x = uniform(rows * in, 1), w = uniform(in * out, 2), b = uniform(out, 3);
  for (auto act : {kernels::Activation::Identity, kernels::Activation::Relu}) {
    std::vector<double> ys(rows * out), yp(rows * out);
    kernels::dense_forward(x, w, b, ys, rows, in, out, act, Exec::Serial);
    kernels::dense_forward(x, w, b, yp, rows, in, out, act, Exec::Parallel);
    CHECK(max_rel(yp, ys) < 1e-13);

    const auto gy = uniform(rows * out, 4);
    std::vector<double> gxs(rows * in, 0.0), gws(in * out, 0.0), gbs(out, 0.0);
    std::vector<double> gxp = gxs, gwp = gws, gbp = gbs;
    kernels::dense_backward(x, w, ys, gy, gxs, gws, gbs, rows, in, out, act, Exec::Serial);
    kernels::dense_backward(x, w, yp, gy, gxp, gwp, gbp, rows, in, out, act, Exec::Parallel);
    CHECK(max_rel(gxp, gxs) < 1e-12);
    CHECK(max_rel(gwp, gws) < 1e-12);
    CHECK(max_rel(gbp, gbs) < 1e-12);
  }
}

TEST_CASE("blocked sum is independent of the worker count") {
  const auto v = uniform(50000, 8);
  const int before = kernels::max_threads();
  kernels::set_threads(1);
  const double one = kernels::sum(v, Exec::Parallel);
  kernels::set_threads(3);
  const double three = kernels::sum(v, Exec::Parallel);
  kernels::set_threads(before);
  CHECK(one == three);
  CHECK(one == doctest::Approx(kernels::sum(v, Exec::Serial)).epsilon(1e-12));
}

TEST_CASE("fused network: serial reference equals parallel tiles") {
  const Net net({6, 64, 64, 64, 1}, 10);
  const std::size_t rows = 9001;
  const auto x = uniform(rows * 6, 11);
  const auto gy = uniform(rows, 12);
  std::vector<double> ys, yp;
  Grads gs(net, rows), gp(net, rows);
  run_mlp<double>(net, x, gy, rows, Exec::Serial, ys, gs);
  run_mlp<double>(net, x, gy, rows, Exec::Parallel, yp, gp);
  CHECK(max_rel(yp, ys) < 1e-12);
  CHECK(max_rel(gp.gx, gs.gx) < 1e-11);
  for (std::size_t l = 0; l < 4; ++l) {
    CHECK(max_rel(gp.gw[l], gs.gw[l]) < 1e-11);
    CHECK(max_rel(gp.gb[l], gs.gb[l]) < 1e-11);
  }
}

TEST_CASE("fused network equals a chain of dense layers") {
  const Net net({6, 16, 16, 1}, 20);
  const std::size_t rows = 300;
  const auto x = uniform(rows * 6, 21);
  const auto gy = uniform(rows, 22);
  std::vector<double> y;
  Grads g(net, rows);
  run_mlp<double>(net, x, gy, rows, Exec::Parallel, y, g);

  // chain
  std::vector<std::vector<double>> acts = {x};
  for (std::size_t l = 0; l < 3; ++l) {
    std::vector<double> out(rows * net.widths[l + 1]);
    const auto act = l + 1 < 3 ? kernels::Activation::Relu : kernels::Activation::Identity;
    kernels::dense_forward(acts.back(), net.w[l], net.b[l], out, rows, net.widths[l],
                           net.widths[l + 1], act, Exec::Serial);
    acts.push_back(std::move(out));
  }
  CHECK(max_rel(y, acts.back()) < 1e-13);
  std::vector<double> up = gy;
  for (std::size_t l = 3; l-- > 0;) {
    const auto act = l + 1 < 3 ? kernels::Activation::Relu : kernels::Activation::Identity;
    std::vector<double> gx(rows * net.widths[l], 0.0), gw(net.w[l].size(), 0.0), gb(net.b[l].size(), 0.0);
    kernels::dense_backward(acts[l], net.w[l], acts[l + 1], up, gx, gw, gb, rows, net.widths[l],
                            net.widths[l + 1], act, Exec::Serial);
    CHECK(max_rel(g.gw[l], gw) < 1e-12);
    CHECK(max_rel(g.gb[l], gb) < 1e-12);
    up = std::move(gx);
  }
  CHECK(max_rel(g.gx, up) < 1e-12);
}

TEST_CASE("single-precision network stays close to double") {
  const Net net({6, 64, 64, 64, 1}, 30);
  const std::size_t rows = 5000;
  const auto x = uniform(rows * 6, 31);
  const auto gy = uniform(rows, 32);
  std::vector<double> yd, yf, yfs;
  Grads gd(net, rows), gf(net, rows), gfs(net, rows);
  run_mlp<double>(net, x, gy, rows, Exec::Parallel, yd, gd);
  run_mlp<float>(net, x, gy, rows, Exec::Parallel, yf, gf);
  run_mlp<float>(net, x, gy, rows, Exec::Serial, yfs, gfs);
  CHECK(max_rel(yf, yd) < 1e-5);
  CHECK(max_rel(yfs, yd) < 1e-5);
  for (std::size_t l = 0; l < 4; ++l) {
    CHECK(max_rel(gf.gw[l], gd.gw[l]) < 1e-3);
    CHECK(max_rel(gfs.gw[l], gd.gw[l]) < 1e-3);
  }
}

TEST_CASE("fused network results do not depend on the worker count") {
  const Net net({6, 64, 64, 64, 1}, 40);
  const std::size_t rows = 10000;
  const auto x = uniform(rows * 6, 41);
  const auto gy = uniform(rows, 42);
  const int before = kernels::max_threads();
  std::vector<double> y1, y3;
  Grads g1(net, rows), g3(net, rows);
  kernels::set_threads(1);
  run_mlp<float>(net, x, gy, rows, Exec::Parallel, y1, g1);
  kernels::set_threads(3);
  run_mlp<float>(net, x, gy, rows, Exec::Parallel, y3, g3);
  kernels::set_threads(before);
  CHECK(y1 == y3);
  CHECK(g1.gx == g3.gx);
  for (std::size_t l = 0; l < 4; ++l) CHECK(g1.gw[l] == g3.gw[l]);
}
