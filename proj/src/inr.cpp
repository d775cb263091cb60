#include "ringfree/inr.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "ringfree/error.hpp"

namespace ringfree::inr {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

// ceil(K/4), ceil(3K/8), ceil(K/2)
std::size_t level_size(std::size_t k, std::size_t l) {
  static_assert(kLevels == 3);
  switch (l) {
    case 0: return ceil_div(k, 4);
    case 1: return ceil_div(3 * k, 8);
    default: return ceil_div(k, 2);
  }
}

std::vector<double> uniform(std::mt19937_64& rng, std::size_t n, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace

std::array<GridLevel, kLevels> level_resolutions(std::size_t n_angles, std::size_t n_detectors) {
  std::array<GridLevel, kLevels> out{};
  for (std::size_t l = 0; l < kLevels; ++l) {
    out[l].rows = std::max<std::size_t>(2, level_size(n_angles, l));
    out[l].cols = std::max<std::size_t>(2, level_size(n_detectors, l));
  }
  return out;
}

std::vector<ad::ParamId> Model::theta_params() const {
  std::vector<ad::ParamId> ids(grid.features.begin(), grid.features.end());
  for (std::size_t k = 0; k < mlp.weights.size(); ++k) {
    ids.push_back(mlp.weights[k]);
    ids.push_back(mlp.biases[k]);
  }
  return ids;
}

std::size_t Model::expected_param_count() const {
  std::size_t n = 0;
  for (const auto& l : grid.levels) n += kFeatures * l.rows * l.cols;
  for (std::size_t k = 0; k + 1 < kWidths.size(); ++k) n += kWidths[k] * kWidths[k + 1] + kWidths[k + 1];
  return n + n_angles * n_detectors;
}

namespace {

// Builds the parameter layout; values are supplied by the caller.
template <class ValueFn>
Model make_model(std::size_t m, std::size_t n, ValueFn&& values) {
  if (m < 2 || n < 2) throw InvalidShape("model needs at least a 2x2 sinogram");
  Model model;
  model.n_angles = m;
  model.n_detectors = n;
  model.grid.levels = level_resolutions(m, n);
  for (std::size_t l = 0; l < kLevels; ++l) {
    const auto& lv = model.grid.levels[l];
    const std::string name = "grid." + std::to_string(l);
    model.grid.features[l] =
        model.store.add(name, lv.rows * lv.cols, kFeatures, values(name, lv.rows * lv.cols * kFeatures, 0));
  }
  for (std::size_t k = 0; k + 1 < kWidths.size(); ++k) {
    const std::string w = "mlp.w" + std::to_string(k);
    const std::string b = "mlp.b" + std::to_string(k);
    model.mlp.weights[k] =
        model.store.add(w, kWidths[k], kWidths[k + 1], values(w, kWidths[k] * kWidths[k + 1], kWidths[k]));
    model.mlp.biases[k] = model.store.add(b, 1, kWidths[k + 1], values(b, kWidths[k + 1], 0));
  }
  model.stripe = {m, n, model.store.add("stripe", m, n, values("stripe", m * n, 0))};
  return model;
}

}  // namespace

Model init_params(std::size_t n_angles, std::size_t n_detectors, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return make_model(n_angles, n_detectors,
                    [&](const std::string& name, std::size_t count, std::size_t fan_in) {
                      if (name.starts_with("mlp.b")) return std::vector<double>(count, 0.0);
                      if (name.starts_with("mlp.w")) {
                        return uniform(rng, count, std::sqrt(6.0 / static_cast<double>(fan_in)));
                      }
                      return uniform(rng, count, kInitRange);
                    });
}

BilinearTaps bilinear_taps(const GridLevel& level, double x, double y) {
  auto axis = [](std::size_t res, double c, std::size_t& i0, double& f) {
    const double u = (std::clamp(c, -1.0, 1.0) + 1.0) * 0.5 * static_cast<double>(res - 1);
    i0 = std::min(static_cast<std::size_t>(u), res - 2);
    f = u - static_cast<double>(i0);
  };
  std::size_t ia, id;
  double fa, fd;
  axis(level.rows, x, ia, fa);
  axis(level.cols, y, id, fd);
  const std::size_t v00 = ia * level.cols + id;
  BilinearTaps t;
  t.vertex = {v00, v00 + 1, v00 + level.cols, v00 + level.cols + 1};
  t.weight = {(1.0 - fa) * (1.0 - fd), (1.0 - fa) * fd, fa * (1.0 - fd), fa * fd};
  return t;
}

std::array<double, kInputWidth> grid_encode(double x, double y, const Model& model) {
  std::array<double, kInputWidth> out{};
  for (std::size_t l = 0; l < kLevels; ++l) {
    const auto taps = bilinear_taps(model.grid.levels[l], x, y);
    const auto feat = model.store.value(model.grid.features[l]);
    for (std::size_t f = 0; f < kFeatures; ++f) {
      double acc = 0.0;
      for (std::size_t t = 0; t < 4; ++t) acc += taps.weight[t] * feat[taps.vertex[t] * kFeatures + f];
      out[l * kFeatures + f] = acc;
    }
  }
  return out;
}

double theta_forward(double x, double y, const Model& model) {
  const auto enc = grid_encode(x, y, model);
  std::vector<double> act(enc.begin(), enc.end());
  std::vector<double> next;
  for (std::size_t k = 0; k + 1 < kWidths.size(); ++k) {
    next.assign(kWidths[k + 1], 0.0);
    const auto relu = k + 2 < kWidths.size() ? kernels::Activation::Relu : kernels::Activation::Identity;
    kernels::dense_forward(act, model.store.value(model.mlp.weights[k]),
                           model.store.value(model.mlp.biases[k]), next, 1, kWidths[k],
                           kWidths[k + 1], relu, kernels::Exec::Serial);
    act.swap(next);
  }
  return act[0];
}

double phi_forward(std::size_t i, std::size_t j, const Model& model) {
  if (i >= model.stripe.rows || j >= model.stripe.cols) {
    throw IndexError("stripe index (" + std::to_string(i) + ", " + std::to_string(j) +
                     ") out of range");
  }
  return model.store.value(model.stripe.matrix)[i * model.stripe.cols + j];
}

Encoding build_encoding(const MultiResGrid& grid, std::span<const double> xs,
                        std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidShape("coordinate arrays differ in length");
  Encoding enc;
  enc.n_points = xs.size();
  for (std::size_t l = 0; l < kLevels; ++l) {
    auto s = std::make_shared<ad::Stencil>();
    const auto& lv = grid.levels[l];
    s->taps = 4;
    s->in_size = lv.rows * lv.cols * kFeatures;
    s->index.resize(xs.size() * kFeatures * 4);
    s->weight.resize(s->index.size());
    for (std::size_t p = 0; p < xs.size(); ++p) {
      const auto t = bilinear_taps(lv, xs[p], ys[p]);
      for (std::size_t f = 0; f < kFeatures; ++f) {
        const std::size_t base = (p * kFeatures + f) * 4;
        for (std::size_t k = 0; k < 4; ++k) {
          s->index[base + k] = static_cast<std::uint32_t>(t.vertex[k] * kFeatures + f);
          s->weight[base + k] = t.weight[k];
        }
      }
    }
    enc.levels[l] = std::move(s);
  }
  return enc;
}

Encoding build_pixel_encoding(const Model& model) {
  const auto cg = model.coords();
  std::vector<double> xs, ys;
  xs.reserve(model.n_angles * model.n_detectors);
  ys.reserve(xs.capacity());
  for (std::size_t i = 0; i < model.n_angles; ++i) {
    for (std::size_t j = 0; j < model.n_detectors; ++j) {
      xs.push_back(cg.x(i));
      ys.push_back(cg.y(j));
    }
  }
  return build_encoding(model.grid, xs, ys);
}

ad::Var theta_on_tape(ad::Tape& tape, const Model& model, const Encoding& enc) {
  std::array<ad::Var, kLevels> parts;
  for (std::size_t l = 0; l < kLevels; ++l) {
    parts[l] = tape.lincomb(tape.param(model.grid.features[l]), enc.levels[l], enc.n_points, kFeatures);
  }
  const ad::Var h = tape.concat_cols(parts);
  std::array<ad::Var, kWidths.size() - 1> w, b;
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = tape.param(model.mlp.weights[k]);
    b[k] = tape.param(model.mlp.biases[k]);
  }
  return tape.mlp(h, w, b);
}

std::vector<double> theta_batch(const Model& model, const Encoding& enc, kernels::Exec exec) {
  const std::size_t n = enc.n_points;
  std::vector<double> x(n * kInputWidth);
  std::vector<double> tmp(n * kFeatures);
  for (std::size_t l = 0; l < kLevels; ++l) {
    enc.levels[l]->apply(model.store.value(model.grid.features[l]), tmp);
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t f = 0; f < kFeatures; ++f) x[p * kInputWidth + l * kFeatures + f] = tmp[p * kFeatures + f];
    }
  }
  std::vector<double> y;
  for (std::size_t k = 0; k + 1 < kWidths.size(); ++k) {
    y.assign(n * kWidths[k + 1], 0.0);
    const auto act = k + 2 < kWidths.size() ? kernels::Activation::Relu : kernels::Activation::Identity;
    kernels::dense_forward(x, model.store.value(model.mlp.weights[k]),
                           model.store.value(model.mlp.biases[k]), y, n, kWidths[k], kWidths[k + 1],
                           act, exec);
    x.swap(y);
  }
  return x;
}

// ---------------------------------------------------------------- checkpoint

namespace {

void put_u32(std::vector<char>& b, std::uint32_t v) {
  char t[4];
  std::memcpy(t, &v, 4);
  b.insert(b.end(), t, t + 4);
}

void put_section(std::vector<char>& b, const std::string& name, std::span<const double> values) {
  put_u32(b, static_cast<std::uint32_t>(name.size()));
  b.insert(b.end(), name.begin(), name.end());
  put_u32(b, static_cast<std::uint32_t>(values.size()));
  for (double v : values) {
    char t[8];
    std::memcpy(t, &v, 8);
    b.insert(b.end(), t, t + 8);
  }
}

struct Reader {
  const std::vector<char>& bytes;
  std::size_t pos = 0;
  const std::filesystem::path& path;

  void need(std::size_t n) const {
    if (bytes.size() - pos < n) throw FormatError(path.string() + ": truncated checkpoint");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  }
  std::pair<std::string, std::vector<double>> section() {
    const std::uint32_t len = u32();
    need(len);
    std::string name(bytes.data() + pos, len);
    pos += len;
    const std::uint32_t count = u32();
    need(static_cast<std::size_t>(count) * 8);
    std::vector<double> v(count);
    std::memcpy(v.data(), bytes.data() + pos, static_cast<std::size_t>(count) * 8);
    pos += static_cast<std::size_t>(count) * 8;
    return {std::move(name), std::move(v)};
  }
};

}  // namespace

void write_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::vector<char> b{'C', 'K', 'P', 'T'};
  put_u32(b, 1);
  const double shape[2] = {static_cast<double>(model.n_angles), static_cast<double>(model.n_detectors)};
  put_section(b, "shape", shape);
  for (std::uint32_t k = 0; k < model.store.count(); ++k) {
    const ad::ParamId id{k};
    put_section(b, model.store.name(id), model.store.value(id));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Model read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  Reader rd{bytes, 0, path};
  rd.need(4);
  if (std::memcmp(bytes.data(), "CKPT", 4) != 0) throw FormatError(path.string() + ": bad magic");
  rd.pos = 4;
  if (rd.u32() != 1) throw FormatError(path.string() + ": unsupported checkpoint version");
  auto [shape_name, shape] = rd.section();
  if (shape_name != "shape" || shape.size() != 2) {
    throw FormatError(path.string() + ": first section must be 'shape'");
  }
  std::vector<std::pair<std::string, std::vector<double>>> sections;
  while (rd.pos < bytes.size()) sections.push_back(rd.section());
  std::size_t next = 0;
  return make_model(static_cast<std::size_t>(shape[0]), static_cast<std::size_t>(shape[1]),
                    [&](const std::string& name, std::size_t count, std::size_t) {
                      if (next >= sections.size() || sections[next].first != name ||
                          sections[next].second.size() != count) {
                        throw FormatError(path.string() + ": section '" + name +
                                          "' missing or mis-sized");
                      }
                      return std::move(sections[next++].second);
                    });
}

}  // namespace ringfree::inr
