#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "../common/oracles.hpp"
#include "ringfree/error.hpp"
#include "ringfree/inr.hpp"
#include "support.hpp"

using namespace ringfree;

namespace {

double vertex_coord(std::size_t k, std::size_t res) {
  return -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(res - 1);
}

}  // namespace

TEST_CASE("level resolutions span a quarter to a half of the grid") {
  const auto lv = inr::level_resolutions(360, 512);
  CHECK(lv[0] == inr::GridLevel{90, 128});
  CHECK(lv[1] == inr::GridLevel{135, 192});
  CHECK(lv[2] == inr::GridLevel{180, 256});
  const auto tiny = inr::level_resolutions(3, 2);
  for (const auto& l : tiny) {
    CHECK(l.rows >= 2);
    CHECK(l.cols >= 2);
  }
}

TEST_CASE("init is seeded, bounded and complete") {
  const auto a = inr::init_params(20, 24, 5);
  const auto b = inr::init_params(20, 24, 5);
  const auto c = inr::init_params(20, 24, 6);
  CHECK(a.store == b.store);
  CHECK_FALSE(a.store == c.store);
  for (auto id : a.grid.features) {
    for (double v : a.store.value(id)) CHECK(std::abs(v) <= 1e-4);
  }
  for (double v : a.store.value(a.stripe.matrix)) CHECK(std::abs(v) <= 1e-4);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = 0; j < 24; ++j) CHECK(std::abs(inr::phi_forward(i, j, a)) <= 1e-4);
  }
  for (auto id : a.mlp.biases) {
    for (double v : a.store.value(id)) CHECK(v == 0.0);
  }
  const double bound = std::sqrt(6.0 / 64.0);
  for (double v : a.store.value(a.mlp.weights[1])) CHECK(std::abs(v) <= bound);
  CHECK(a.store.scalar_count() == a.expected_param_count());
  CHECK_THROWS_AS(inr::init_params(1, 5, 0), InvalidShape);
}

TEST_CASE("encoding at a vertex returns its features") {
  auto model = inr::init_params(16, 20, 1);
  for (std::size_t l = 0; l < inr::kLevels; ++l) {
    const auto& lv = model.grid.levels[l];
    const std::size_t r = 1, c = 2;
    const auto taps = inr::bilinear_taps(lv, vertex_coord(r, lv.rows), vertex_coord(c, lv.cols));
    double wsum = 0.0;
    for (std::size_t t = 0; t < 4; ++t) {
      if (taps.vertex[t] == r * lv.cols + c) CHECK(taps.weight[t] == doctest::Approx(1.0));
      wsum += taps.weight[t];
    }
    CHECK(wsum == doctest::Approx(1.0));
    const auto enc = inr::grid_encode(vertex_coord(r, lv.rows), vertex_coord(c, lv.cols), model);
    const auto feat = model.store.value(model.grid.features[l]);
    for (std::size_t f = 0; f < inr::kFeatures; ++f) {
      CHECK(enc[l * inr::kFeatures + f] ==
            doctest::Approx(feat[(r * lv.cols + c) * inr::kFeatures + f]).epsilon(1e-12));
    }
  }
}

TEST_CASE("encoding between horizontal neighbours is their mean") {
  auto model = inr::init_params(16, 20, 2);
  const auto& lv = model.grid.levels[2];
  const std::size_t r = 3, c = 4;
  const double x = vertex_coord(r, lv.rows);
  const double y = 0.5 * (vertex_coord(c, lv.cols) + vertex_coord(c + 1, lv.cols));
  const auto enc = inr::grid_encode(x, y, model);
  const auto feat = model.store.value(model.grid.features[2]);
  for (std::size_t f = 0; f < inr::kFeatures; ++f) {
    const double mean = 0.5 * (feat[(r * lv.cols + c) * inr::kFeatures + f] +
                               feat[(r * lv.cols + c + 1) * inr::kFeatures + f]);
    CHECK(enc[2 * inr::kFeatures + f] == doctest::Approx(mean).epsilon(1e-10));
  }
}

TEST_CASE("partition of unity") {
  auto model = inr::init_params(13, 17, 3);
  for (auto id : model.grid.features) {
    for (auto& v : model.store.value(id)) v = 0.375;
  }
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (int k = 0; k < 200; ++k) {
    const double x = u(rng), y = u(rng);
    for (const auto& lv : model.grid.levels) {
      const auto taps = inr::bilinear_taps(lv, x, y);
      double s = 0.0;
      for (double w : taps.weight) {
        CHECK(w >= -1e-15);
        s += w;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    }
    for (double e : inr::grid_encode(x, y, model)) CHECK(e == doctest::Approx(0.375).epsilon(1e-14));
  }
}

TEST_CASE("zero output layer predicts zero everywhere") {
  auto model = inr::init_params(10, 12, 4);
  oracle::spread_parameters(model, 4);
  for (auto& v : model.store.value(model.mlp.weights.back())) v = 0.0;
  for (auto& v : model.store.value(model.mlp.biases.back())) v = 0.0;
  CHECK(inr::theta_forward(0.3, -0.8, model) == 0.0);
  const auto enc = inr::build_pixel_encoding(model);
  for (double v : inr::theta_batch(model, enc)) CHECK(v == 0.0);
}

TEST_CASE("theta is continuous") {
  auto model = inr::init_params(10, 12, 5);
  oracle::spread_parameters(model, 5);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-0.99, 0.99);
  for (int k = 0; k < 50; ++k) {
    const double x = u(rng), y = u(rng);
    const double f = inr::theta_forward(x, y, model);
    CHECK(std::abs(f - inr::theta_forward(x + 1e-6, y, model)) < 1e-3);
    CHECK(std::abs(f - inr::theta_forward(x, y + 1e-6, model)) < 1e-3);
  }
}

TEST_CASE("batch, tape and pointwise evaluation agree") {
  auto model = inr::init_params(9, 11, 7);
  oracle::spread_parameters(model, 7);
  const auto enc = inr::build_pixel_encoding(model);
  const auto par = inr::theta_batch(model, enc, kernels::Exec::Parallel);
  const auto ser = inr::theta_batch(model, enc, kernels::Exec::Serial);
  ad::Tape tape(model.store);
  const auto on_tape = tape.value(inr::theta_on_tape(tape, model, enc));
  const auto cg = model.coords();
  for (std::size_t i = 0; i < 9; ++i) {
    for (std::size_t j = 0; j < 11; ++j) {
      const double ref = inr::theta_forward(cg.x(i), cg.y(j), model);
      CHECK(par[i * 11 + j] == doctest::Approx(ref).epsilon(1e-12));
      CHECK(ser[i * 11 + j] == doctest::Approx(ref).epsilon(1e-12));
      CHECK(on_tape[i * 11 + j] == doctest::Approx(ref).epsilon(1e-12));
    }
  }
}

TEST_CASE("evaluation order does not change results") {
  auto model = inr::init_params(9, 11, 8);
  oracle::spread_parameters(model, 8);
  const auto cg = model.coords();
  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < 11; ++j) {  // column-major order
    for (std::size_t i = 0; i < 9; ++i) {
      xs.push_back(cg.x(i));
      ys.push_back(cg.y(j));
    }
  }
  const auto by_col = inr::theta_batch(model, inr::build_encoding(model.grid, xs, ys));
  const auto by_row = inr::theta_batch(model, inr::build_pixel_encoding(model));
  for (std::size_t i = 0; i < 9; ++i) {
    for (std::size_t j = 0; j < 11; ++j) CHECK(by_col[j * 9 + i] == by_row[i * 11 + j]);
  }
}

TEST_CASE("theta gradient matches finite differences") {
  auto model = inr::init_params(6, 7, 9);
  oracle::spread_parameters(model, 9);
  const auto enc = inr::build_pixel_encoding(model);
  const auto ids = model.theta_params();
  const std::vector<double> wts = [&] {
    std::vector<double> w(enc.n_points);
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : w) v = u(rng);
    return w;
  }();
  const ad::GradFn fn = [&](std::span<const double> p, std::vector<double>* grad) {
    oracle::unflatten(model.store, ids, p);
    ad::Tape tape(model.store);
    const ad::Var f = tape.sum(
        tape.mul(inr::theta_on_tape(tape, model, enc), tape.constant(wts, enc.n_points, 1)));
    if (grad) {
      tape.backward(f);
      *grad = oracle::flat_grad(model.store, ids);
    }
    return tape.scalar(f);
  };
  const auto point = oracle::flatten(model.store, ids);
  CHECK(ad::check_gradients(fn, point) < 1e-5);
}

TEST_CASE("stripe field gradient of a sum") {
  auto model = inr::init_params(4, 5, 11);
  ad::Tape tape(model.store);
  auto idx = std::make_shared<const std::vector<std::uint32_t>>(std::vector<std::uint32_t>{0, 7, 19});
  const ad::Var f = tape.sum(tape.gather(tape.param(model.stripe.matrix), idx, 3, 1));
  tape.backward(f);
  const auto g = model.store.grad(model.stripe.matrix);
  for (std::size_t k = 0; k < g.size(); ++k) {
    CHECK(g[k] == ((k == 0 || k == 7 || k == 19) ? 1.0 : 0.0));
  }
  model.store.value(model.stripe.matrix)[7] = 0.125;
  CHECK(inr::phi_forward(1, 2, model) == 0.125);
  CHECK_THROWS_AS(inr::phi_forward(4, 0, model), IndexError);
}

TEST_CASE("checkpoint round trip") {
  testing::TempDir dir;
  auto model = inr::init_params(8, 9, 12);
  oracle::spread_parameters(model, 12);
  inr::write_checkpoint(model, dir / "m.ckpt");
  const auto back = inr::read_checkpoint(dir / "m.ckpt");
  CHECK(back.n_angles == 8);
  CHECK(back.n_detectors == 9);
  CHECK(back.store == model.store);
  CHECK(inr::theta_forward(0.1, 0.2, back) == inr::theta_forward(0.1, 0.2, model));
  std::ofstream(dir / "bad.ckpt") << "CKPTxx";
  CHECK_THROWS_AS(inr::read_checkpoint(dir / "bad.ckpt"), FormatError);
}
