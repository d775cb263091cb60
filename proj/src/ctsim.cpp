#include "ringfree/ctsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <random>

#include <fftw3.h>
#include <json.hpp>

#include "ringfree/error.hpp"

namespace ringfree::ct {

namespace {

constexpr double kPi = std::numbers::pi;

double deg(double d) { return d * kPi / 180.0; }

double median_of(std::vector<double>& v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

struct Ray {
  double sx, sy;  // source
  double dx, dy;  // unit direction
};

Ray ray_for(const FanBeamGeometry& g, std::size_t view, std::size_t bin) {
  const double b = g.view_angle(view);
  const double c = std::cos(b), s = std::sin(b);
  const double u = g.bin_offset(static_cast<double>(bin));
  const double sx = g.sod * c, sy = g.sod * s;
  const double px = -(g.sdd - g.sod) * c - u * s;
  const double py = -(g.sdd - g.sod) * s + u * c;
  const double len = std::hypot(px - sx, py - sy);
  return {sx, sy, (px - sx) / len, (py - sy) / len};
}

double chord(const Ellipse& e, const Ray& r) {
  const double c = std::cos(e.phi), s = std::sin(e.phi);
  const double ox = r.sx - e.cx, oy = r.sy - e.cy;
  const double px = (c * ox + s * oy) / e.a, py = (-s * ox + c * oy) / e.b;
  const double qx = (c * r.dx + s * r.dy) / e.a, qy = (-s * r.dx + c * r.dy) / e.b;
  const double A = qx * qx + qy * qy;
  const double B = 2.0 * (px * qx + py * qy);
  const double C = px * px + py * py - 1.0;
  const double disc = B * B - 4.0 * A * C;
  if (disc <= 0.0) return 0.0;
  return std::sqrt(disc) / A;
}

double bilinear(const Image& img, double r, double c) {
  const double fr = std::floor(r), fc = std::floor(c);
  const auto r0 = static_cast<long>(fr), c0 = static_cast<long>(fc);
  const double wr = r - fr, wc = c - fc;
  const long rows = static_cast<long>(img.rows()), cols = static_cast<long>(img.cols());
  auto at = [&](long i, long j) {
    return (i < 0 || j < 0 || i >= rows || j >= cols)
               ? 0.0
               : img(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  };
  return (1 - wr) * ((1 - wc) * at(r0, c0) + wc * at(r0, c0 + 1)) +
         wr * ((1 - wc) * at(r0 + 1, c0) + wc * at(r0 + 1, c0 + 1));
}

}  // namespace

// ------------------------------------------------------------------ geometry

FanBeamGeometry FanBeamGeometry::desk() {
  FanBeamGeometry g;
  g.n_detectors = 512;
  g.det_pitch = 0.075 * 2068.0 / 512.0;
  g.n_views = 360;
  return g;
}

void FanBeamGeometry::validate() const {
  if (!(sod > 0.0) || !(sdd > sod)) throw ConfigError("geometry needs sdd > sod > 0");
  if (!(det_pitch > 0.0)) throw ConfigError("detector pitch must be positive");
  if (n_detectors < 2 || n_views < 2) throw ConfigError("geometry needs >= 2 bins and views");
  if (!std::isfinite(angle0)) throw ConfigError("angle0 must be finite");
  if (fov_radius() >= sod) throw ConfigError("detector too wide for the source distance");
}

double FanBeamGeometry::view_angle(std::size_t k) const {
  return angle0 + 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n_views);
}

double FanBeamGeometry::bin_offset(double j) const {
  return (j - 0.5 * static_cast<double>(n_detectors - 1)) * det_pitch;
}

double FanBeamGeometry::fov_radius() const {
  const double u = bin_offset(0.0);
  return sod * std::abs(u) / std::hypot(sdd, u);
}

double FanBeamGeometry::pixel_size(std::size_t image_size) const {
  return 2.0 * fov_radius() / static_cast<double>(image_size);
}

std::string FanBeamGeometry::to_json() const {
  nlohmann::ordered_json j;
  j["sdd_mm"] = sdd;
  j["sod_mm"] = sod;
  j["n_det"] = n_detectors;
  j["pitch_mm"] = det_pitch;
  j["n_views"] = n_views;
  j["angle0"] = angle0;
  return j.dump();
}

FanBeamGeometry FanBeamGeometry::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("geometry JSON: ") + e.what());
  }
  FanBeamGeometry g;
  try {
    g.sdd = j.at("sdd_mm").get<double>();
    g.sod = j.at("sod_mm").get<double>();
    g.n_detectors = j.at("n_det").get<std::size_t>();
    g.det_pitch = j.at("pitch_mm").get<double>();
    g.n_views = j.at("n_views").get<std::size_t>();
    g.angle0 = j.value("angle0", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("geometry JSON: ") + e.what());
  }
  g.validate();
  return g;
}

// ------------------------------------------------------------------ phantoms

bool Ellipse::contains(double x, double y) const {
  const double c = std::cos(phi), s = std::sin(phi);
  const double dx = x - cx, dy = y - cy;
  const double u = (c * dx + s * dy) / a, v = (-s * dx + c * dy) / b;
  return u * u + v * v <= 1.0;
}

double Ellipse::extent() const { return std::hypot(cx, cy) + std::max(a, b); }

double EllipsePhantom::value_at(double x, double y) const {
  double v = 0.0;
  for (const auto& e : ellipses) {
    if (e.contains(x, y)) v += e.value;
  }
  return std::max(0.0, v);
}

Image EllipsePhantom::raster(std::size_t supersample) const {
  if (supersample == 0) throw ConfigError("supersampling factor must be >= 1");
  Image img(size, size);
  const double half = 0.5 * static_cast<double>(size - 1);
  const double sub = pixel_mm / static_cast<double>(supersample);
  const double first = -0.5 * pixel_mm + 0.5 * sub;
  const double norm = 1.0 / static_cast<double>(supersample * supersample);
  for (std::size_t r = 0; r < size; ++r) {
    const double y = (static_cast<double>(r) - half) * pixel_mm;
    for (std::size_t c = 0; c < size; ++c) {
      const double x = (static_cast<double>(c) - half) * pixel_mm;
      if (supersample == 1) {
        img(r, c) = value_at(x, y);
        continue;
      }
      double acc = 0.0;
      for (std::size_t a = 0; a < supersample; ++a) {
        for (std::size_t b = 0; b < supersample; ++b) {
          acc += value_at(x + first + static_cast<double>(b) * sub, y + first + static_cast<double>(a) * sub);
        }
      }
      img(r, c) = acc * norm;
    }
  }
  return img;
}

double EllipsePhantom::max_value() const {
  double s = 0.0;
  for (const auto& e : ellipses) s += std::max(0.0, e.value);
  return s;
}

EllipsePhantom shepp_logan(const FanBeamGeometry& g, std::size_t size, double attenuation) {
  // value, a, b, x0, y0, phi (deg), unit-square coordinates
  static constexpr double table[10][6] = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},          {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
      {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},      {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
      {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},         {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
      {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},       {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
      {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},     {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
  };
  g.validate();
  const double scale = g.fov_radius();
  EllipsePhantom p;
  p.size = size;
  p.pixel_mm = g.pixel_size(size);
  for (const auto& row : table) {
    p.ellipses.push_back({row[3] * scale, row[4] * scale, row[1] * scale, row[2] * scale,
                          deg(row[5]), row[0] * attenuation});
  }
  return p;
}

EllipsePhantom disks(const FanBeamGeometry& g, std::size_t size, std::vector<Ellipse> extra,
                     bool centered, double attenuation) {
  g.validate();
  EllipsePhantom p;
  p.size = size;
  p.pixel_mm = g.pixel_size(size);
  const double r = 0.5 * g.fov_radius();
  if (centered) p.ellipses.push_back({0.0, 0.0, r, r, 0.0, attenuation});
  for (auto& e : extra) p.ellipses.push_back(e);
  return p;
}

EllipsePhantom make_phantom(std::string_view name, const FanBeamGeometry& g, std::size_t size) {
  if (size < 2) throw ConfigError("phantom size must be >= 2");
  if (name == "shepp-logan") return shepp_logan(g, size);
  if (name == "disks") return disks(g, size);
  throw ConfigError("unknown phantom '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- projectors

Sinogram project_fan_analytic(const std::vector<Ellipse>& ellipses, const FanBeamGeometry& g) {
  g.validate();
  Grid<double> out(g.n_views, g.n_detectors);
  const auto views = static_cast<long>(g.n_views);
#pragma omp parallel for schedule(static)
  for (long k = 0; k < views; ++k) {
    for (std::size_t j = 0; j < g.n_detectors; ++j) {
      const Ray r = ray_for(g, static_cast<std::size_t>(k), j);
      double acc = 0.0;
      for (const auto& e : ellipses) acc += e.value * chord(e, r);
      out(static_cast<std::size_t>(k), j) = acc;
    }
  }
  return Sinogram(std::move(out));
}

Sinogram project_fan(const Image& raster, double pixel_mm, const FanBeamGeometry& g) {
  g.validate();
  if (raster.rows() < 2 || raster.cols() < 2) throw InvalidShape("raster must be >= 2x2");
  if (!(pixel_mm > 0.0)) throw ConfigError("pixel size must be positive");
  const double fov = g.fov_radius();
  const double hr = 0.5 * static_cast<double>(raster.rows() - 1);
  const double hc = 0.5 * static_cast<double>(raster.cols() - 1);
  for (std::size_t r = 0; r < raster.rows(); ++r) {
    for (std::size_t c = 0; c < raster.cols(); ++c) {
      if (raster(r, c) == 0.0) continue;
      const double x = (static_cast<double>(c) - hc) * pixel_mm;
      const double y = (static_cast<double>(r) - hr) * pixel_mm;
      if (std::hypot(x, y) > fov) throw FieldOfViewError("phantom extends beyond the field of view");
    }
  }
  // Bilinear support reaches one pixel beyond the outermost nonzero center.
  const double radius = fov + 1.5 * pixel_mm;
  const double step = 0.25 * pixel_mm;
  Grid<double> out(g.n_views, g.n_detectors);
  const auto views = static_cast<long>(g.n_views);
#pragma omp parallel for schedule(static)
  for (long k = 0; k < views; ++k) {
    for (std::size_t j = 0; j < g.n_detectors; ++j) {
      const Ray ray = ray_for(g, static_cast<std::size_t>(k), j);
      const double b = ray.sx * ray.dx + ray.sy * ray.dy;
      const double c = ray.sx * ray.sx + ray.sy * ray.sy - radius * radius;
      const double disc = b * b - c;
      double acc = 0.0;
      if (disc > 0.0) {
        const double t0 = -b - std::sqrt(disc);
        const double len = 2.0 * std::sqrt(disc);
        const auto n = static_cast<std::size_t>(std::ceil(len / step));
        const double h = len / static_cast<double>(n);
        for (std::size_t s = 0; s < n; ++s) {
          const double t = t0 + (static_cast<double>(s) + 0.5) * h;
          const double x = ray.sx + t * ray.dx, y = ray.sy + t * ray.dy;
          acc += bilinear(raster, y / pixel_mm + hr, x / pixel_mm + hc);
        }
        acc *= h;
      }
      out(static_cast<std::size_t>(k), j) = acc;
    }
  }
  return Sinogram(std::move(out));
}

Sinogram project_fan(const EllipsePhantom& phantom, const FanBeamGeometry& g) {
  g.validate();
  for (const auto& e : phantom.ellipses) {
    if (e.value != 0.0 && e.extent() > g.fov_radius()) {
      throw FieldOfViewError("phantom extends beyond the field of view");
    }
  }
  return project_fan(phantom.raster(kProjectionSupersample), phantom.pixel_mm, g);
}

Sinogram simulate_projection(std::string_view phantom, const FanBeamGeometry& g,
                             std::size_t image_size) {
  return project_fan(make_phantom(phantom, g, image_size * kProjectionOversample), g);
}

// ---------------------------------------------------------------- corruption

CorruptionSpec CorruptionSpec::desk() {
  CorruptionSpec s;
  s.dead_begin = 200;
  s.dead_end = 205;
  return s;
}

void CorruptionSpec::validate() const {
  if (!(gain_fraction >= 0.0 && gain_fraction <= 1.0)) {
    throw ConfigError("gain fraction must lie in [0, 1]");
  }
  if (!(gain_amplitude >= 0.0 && gain_amplitude < 1.0)) {
    throw ConfigError("gain amplitude must lie in [0, 1)");
  }
  if (!(i0 > 0.0) || !std::isfinite(i0)) throw ConfigError("i0 must be positive");
  if (dead_end < dead_begin) throw ConfigError("dead column range is reversed");
}

Corrupted corrupt(const Sinogram& p, const CorruptionSpec& spec) {
  spec.validate();
  const std::size_t m = p.n_angles(), n = p.n_detectors();
  if (spec.dead_end > n) throw ConfigError("dead columns exceed the detector count");
  std::mt19937_64 rng(spec.seed);

  CorruptionTruth truth;
  truth.gains.assign(n, 1.0);
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < n; ++j) order[j] = j;
  std::shuffle(order.begin(), order.end(), rng);
  const auto chosen = static_cast<std::size_t>(std::floor(spec.gain_fraction * static_cast<double>(n)));
  std::uniform_real_distribution<double> gain(1.0 - spec.gain_amplitude, 1.0 + spec.gain_amplitude);
  truth.gained_columns.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(chosen));
  std::sort(truth.gained_columns.begin(), truth.gained_columns.end());
  for (std::size_t col : truth.gained_columns) truth.gains[col] = gain(rng);
  for (std::size_t j = spec.dead_begin; j < spec.dead_end; ++j) truth.dead_columns.push_back(j);

  // Poisson sampling beyond ~1e15 expected counts would lose integer precision.
  constexpr double kMaxMean = 1e15;
  Grid<double> out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double mean = std::min(kMaxMean, truth.gains[j] * spec.i0 * std::exp(-p(i, j)));
      double counts = mean;
      if (spec.noise) {
        std::poisson_distribution<long long> draw(std::max(mean, 1e-300));
        counts = static_cast<double>(draw(rng));
      }
      out(i, j) = -std::log(std::max(counts, 1.0) / spec.i0);
    }
  }
  for (std::size_t j : truth.dead_columns) {
    for (std::size_t i = 0; i < m; ++i) out(i, j) = 0.0;
  }
  return {Sinogram(std::move(out)), std::move(truth)};
}

// ----------------------------------------------------------------------- FBP

namespace {

/// Cosine-weighted, ramp-filtered views on the virtual detector through the isocenter.
Grid<double> filter_views(const Sinogram& p, const FanBeamGeometry& g) {
  const std::size_t m = p.n_angles(), n = p.n_detectors();
  const double a = g.det_pitch * g.sod / g.sdd;
  std::size_t len = 1;
  while (len < 2 * n) len <<= 1;
  const std::size_t bins = len / 2 + 1;

  double* in = fftw_alloc_real(len);
  fftw_complex* spec = fftw_alloc_complex(bins);
  fftw_complex* kern = fftw_alloc_complex(bins);
  fftw_plan fwd = fftw_plan_dft_r2c_1d(static_cast<int>(len), in, spec, FFTW_ESTIMATE);
  fftw_plan inv = fftw_plan_dft_c2r_1d(static_cast<int>(len), spec, in, FFTW_ESTIMATE);

  std::fill(in, in + len, 0.0);
  in[0] = 1.0 / (4.0 * a * a);
  for (std::size_t k = 1; k < n; k += 2) {
    const double v = -1.0 / (static_cast<double>(k * k) * kPi * kPi * a * a);
    in[k] = v;
    in[len - k] = v;
  }
  fftw_execute(fwd);
  std::memcpy(kern, spec, sizeof(fftw_complex) * bins);

  std::vector<double> cosw(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double u = g.bin_offset(static_cast<double>(j)) * g.sod / g.sdd;
    cosw[j] = g.sod / std::sqrt(g.sod * g.sod + u * u);
  }
  // a for the convolution sum, 1/len for the unnormalized inverse transform.
  const double norm = a / static_cast<double>(len);
  Grid<double> q(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(in, in + len, 0.0);
    for (std::size_t j = 0; j < n; ++j) in[j] = p(i, j) * cosw[j];
    fftw_execute(fwd);
    for (std::size_t b = 0; b < bins; ++b) {
      const double re = spec[b][0] * kern[b][0] - spec[b][1] * kern[b][1];
      const double im = spec[b][0] * kern[b][1] + spec[b][1] * kern[b][0];
      spec[b][0] = re;
      spec[b][1] = im;
    }
    fftw_execute(inv);
    for (std::size_t j = 0; j < n; ++j) q(i, j) = in[j] * norm;
  }
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(inv);
  fftw_free(in);
  fftw_free(spec);
  fftw_free(kern);
  return q;
}

template <bool Parallel>
Image backproject(const Grid<double>& q, const FanBeamGeometry& g, std::size_t size) {
  const std::size_t m = q.rows(), n = q.cols();
  const double a = g.det_pitch * g.sod / g.sdd;
  const double px = g.pixel_size(size);
  const double half = 0.5 * static_cast<double>(size - 1);
  const double center = 0.5 * static_cast<double>(n - 1);
  std::vector<double> cs(m), sn(m);
  for (std::size_t k = 0; k < m; ++k) {
    cs[k] = std::cos(g.view_angle(k));
    sn[k] = std::sin(g.view_angle(k));
  }
  const double w = 0.5 * 2.0 * kPi / static_cast<double>(m);
  Image img(size, size);
  const auto rows = static_cast<long>(size);
#pragma omp parallel for schedule(static) if (Parallel)
  for (long r = 0; r < rows; ++r) {
    const double y = (static_cast<double>(r) - half) * px;
    for (std::size_t c = 0; c < size; ++c) {
      const double x = (static_cast<double>(c) - half) * px;
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        const double s = x * cs[k] + y * sn[k];
        const double t = -x * sn[k] + y * cs[k];
        const double l = g.sod - s;
        const double pos = g.sod * t / l / a + center;
        if (pos < 0.0 || pos > static_cast<double>(n - 1)) continue;
        const auto j0 = std::min(static_cast<std::size_t>(pos), n - 2);
        const double f = pos - static_cast<double>(j0);
        const double v = (1.0 - f) * q(k, j0) + f * q(k, j0 + 1);
        const double u = l / g.sod;
        acc += v / (u * u);
      }
      img(static_cast<std::size_t>(r), c) = w * acc;
    }
  }
  return img;
}

void check_fbp_args(const Sinogram& p, const FanBeamGeometry& g, std::size_t size) {
  g.validate();
  if (p.n_angles() != g.n_views || p.n_detectors() != g.n_detectors) {
    throw InvalidShape("sinogram shape does not match the geometry");
  }
  if (size < 2) throw ConfigError("image size must be >= 2");
}

}  // namespace

Image fbp_fan(const Sinogram& p, const FanBeamGeometry& g, std::size_t image_size) {
  check_fbp_args(p, g, image_size);
  return backproject<true>(filter_views(p, g), g, image_size);
}

Image fbp_fan_serial(const Sinogram& p, const FanBeamGeometry& g, std::size_t image_size) {
  check_fbp_args(p, g, image_size);
  return backproject<false>(filter_views(p, g), g, image_size);
}

// ------------------------------------------------------------------ baseline

Sinogram sorted_median_baseline(const Sinogram& p, std::size_t window) {
  if (window == 0 || window % 2 == 0) throw ConfigError("median window must be odd and >= 1");
  if (window == 1) return p;
  const auto [sorted, perm] = sort_columns(p);
  const std::size_t m = p.n_angles(), n = p.n_detectors();
  const auto half = static_cast<long>(window / 2);
  Grid<double> out(m, n);
  std::vector<double> buf(window);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (long d = -half; d <= half; ++d) {
        const long jj = std::clamp(static_cast<long>(j) + d, 0L, static_cast<long>(n) - 1);
        buf[static_cast<std::size_t>(d + half)] = sorted(i, static_cast<std::size_t>(jj));
      }
      out(perm(i, j), j) = median_of(buf);
    }
  }
  return Sinogram(std::move(out));
}

// --------------------------------------------------------------------- rings

double ring_radius_px(const FanBeamGeometry& g, double column, std::size_t image_size) {
  const double u = g.bin_offset(column);
  return g.sod * std::abs(u) / std::hypot(g.sdd, u) / g.pixel_size(image_size);
}

std::vector<double> radial_profile(const Image& img) {
  const double hr = 0.5 * static_cast<double>(img.rows() - 1);
  const double hc = 0.5 * static_cast<double>(img.cols() - 1);
  const auto bins = static_cast<std::size_t>(std::floor(std::min(hr, hc))) + 1;
  std::vector<double> sum(bins, 0.0), count(bins, 0.0);
  for (std::size_t r = 0; r < img.rows(); ++r) {
    for (std::size_t c = 0; c < img.cols(); ++c) {
      const double rad = std::hypot(static_cast<double>(r) - hr, static_cast<double>(c) - hc);
      const auto b = static_cast<std::size_t>(std::floor(rad + 0.5));
      if (b >= bins) continue;
      sum[b] += img(r, c);
      count[b] += 1.0;
    }
  }
  for (std::size_t b = 0; b < bins; ++b) sum[b] = count[b] > 0.0 ? sum[b] / count[b] : 0.0;
  return sum;
}

namespace {

constexpr std::size_t kMinRadius = 3;
constexpr long kMedianHalf = 7;

std::vector<double> highpass(const std::vector<double>& prof) {
  std::vector<double> hp(prof.size(), 0.0), buf;
  const auto len = static_cast<long>(prof.size());
  for (long b = 0; b < len; ++b) {
    buf.clear();
    for (long d = -kMedianHalf; d <= kMedianHalf; ++d) {
      const long k = b + d;
      if (k >= 0 && k < len) buf.push_back(prof[static_cast<std::size_t>(k)]);
    }
    hp[static_cast<std::size_t>(b)] = prof[static_cast<std::size_t>(b)] - median_of(buf);
  }
  return hp;
}

double robust_sigma(const std::vector<double>& hp) {
  std::vector<double> v(hp.begin() + std::min(hp.size(), kMinRadius), hp.end());
  if (v.empty()) return 0.0;
  const double med = median_of(v);
  for (double& x : v) x = std::abs(x - med);
  return 1.4826 * median_of(v);
}

}  // namespace

RingDetection detect_ring(const Image& img, double radius_px, double tol_px, double threshold) {
  const auto hp = highpass(radial_profile(img));
  const double sigma = robust_sigma(hp);
  RingDetection d;
  double best = -1.0;
  for (std::size_t b = kMinRadius; b < hp.size(); ++b) {
    if (std::abs(static_cast<double>(b) - radius_px) > tol_px) continue;
    if (std::abs(hp[b]) > best) {
      best = std::abs(hp[b]);
      d.peak_radius_px = static_cast<double>(b);
    }
  }
  if (best < 0.0) return d;
  if (sigma > 0.0) {
    d.score = best / sigma;
  } else {
    d.score = best > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  d.detected = d.score > threshold;
  return d;
}

double strongest_ring_radius(const Image& img) {
  const auto hp = highpass(radial_profile(img));
  std::size_t arg = kMinRadius;
  for (std::size_t b = kMinRadius; b < hp.size(); ++b) {
    if (std::abs(hp[b]) > std::abs(hp[arg])) arg = b;
  }
  return static_cast<double>(arg);
}

}  // namespace ringfree::ct
