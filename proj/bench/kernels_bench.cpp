// Serial reference against the OpenMP kernels at desk-scale sizes.
// Arg 0 selects Serial, 1 Parallel.

#include <array>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "ringfree/ctsim.hpp"
#include "ringfree/kernels.hpp"

using namespace ringfree;

namespace {

constexpr std::size_t kRows = 360 * 512;

std::vector<double> uniform(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

kernels::Exec exec_of(const benchmark::State& s) {
  return s.range(0) == 0 ? kernels::Exec::Serial : kernels::Exec::Parallel;
}

// The network of the IS model: 6 -> 64 -> 64 -> 64 -> 1.
struct Net {
  std::array<std::size_t, 5> widths = {6, 64, 64, 64, 1};
  std::vector<std::vector<double>> w, b;
  std::vector<std::span<const double>> ws, bs;
  Net() {
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      w.push_back(uniform(widths[l] * widths[l + 1], 10 + l, -0.3, 0.3));
      b.push_back(uniform(widths[l + 1], 20 + l, -0.1, 0.1));
    }
    for (std::size_t l = 0; l < w.size(); ++l) {
      ws.emplace_back(w[l]);
      bs.emplace_back(b[l]);
    }
  }
  kernels::MlpView view() const { return {widths, ws, bs}; }
};

void BM_Dense(benchmark::State& state) {
  const std::size_t in = 64, out = 64;
  const auto x = uniform(kRows * in, 1), w = uniform(in * out, 2), b = uniform(out, 3);
  std::vector<double> y(kRows * out);
  for (auto _ : state) {
    kernels::dense_forward(x, w, b, y, kRows, in, out, kernels::Activation::Relu, exec_of(state));
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kRows));
}

template <class T>
void BM_Mlp(benchmark::State& state) {
  const Net net;
  const auto view = net.view();
  const auto x = uniform(kRows * 6, 4);
  std::vector<T> hidden(kernels::mlp_hidden_size(view, kRows));
  std::vector<double> y(kRows), gy = uniform(kRows, 5), gx(kRows * 6);
  std::vector<std::vector<double>> gw, gb;
  std::vector<std::span<double>> gws, gbs;
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    gw.emplace_back(net.w[l].size());
    gb.emplace_back(net.b[l].size());
  }
  for (std::size_t l = 0; l < gw.size(); ++l) {
    gws.emplace_back(gw[l]);
    gbs.emplace_back(gb[l]);
  }
  for (auto _ : state) {
    kernels::mlp_forward<T>(view, x, hidden, y, kRows, exec_of(state));
    kernels::mlp_backward<T>(view, x, hidden, gy, gx, gws, gbs, kRows, exec_of(state));
    benchmark::DoNotOptimize(gw.front().data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kRows));
}

void BM_Sum(benchmark::State& state) {
  const auto v = uniform(kRows, 6);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::sum(v, exec_of(state)));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kRows));
}

void BM_Fbp(benchmark::State& state) {
  const auto g = ct::FanBeamGeometry::desk();
  const auto p = ct::project_fan_analytic(ct::shepp_logan(g, 256).ellipses, g);
  for (auto _ : state) {
    auto img = state.range(0) == 0 ? ct::fbp_fan_serial(p, g, 256) : ct::fbp_fan(p, g, 256);
    benchmark::DoNotOptimize(img.flat().data());
  }
}

}  // namespace

BENCHMARK(BM_Dense)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Mlp<double>)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Mlp<float>)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Sum)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Fbp)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
