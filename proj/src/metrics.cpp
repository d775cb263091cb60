#include "ringfree/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "ringfree/error.hpp"

namespace ringfree::metrics {

namespace {

void require_same(const Grid<double>& a, const Grid<double>& b) {
  if (!a.same_shape(b)) throw InvalidShape("metric operands differ in shape");
  if (a.size() == 0) throw InvalidShape("metric operands are empty");
}

std::pair<double, double> range_of(const Grid<double>& g) {
  const auto [lo, hi] = std::minmax_element(g.flat().begin(), g.flat().end());
  return {*lo, *hi};
}

/// Separable "valid" correlation with a normalized 1D kernel.
Grid<double> filter_valid(const Grid<double>& g, const std::vector<double>& k) {
  const std::size_t w = k.size();
  const std::size_t rows = g.rows() - w + 1, cols = g.cols() - w + 1;
  Grid<double> tmp(g.rows(), cols), out(rows, cols);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < w; ++t) s += k[t] * g(i, j + t);
      tmp(i, j) = s;
    }
  }
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < w; ++t) s += k[t] * tmp(i + t, j);
      out(i, j) = s;
    }
  }
  return out;
}

}  // namespace

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  if (std::isinf(psnr_db)) {
    j["psnr_db"] = "inf";
  } else {
    j["psnr_db"] = psnr_db;
  }
  j["ssim"] = ssim;
  j["mse"] = mse;
  return j.dump();
}

double mse(const Grid<double>& a, const Grid<double>& ref) {
  require_same(a, ref);
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - ref[k]) * (a[k] - ref[k]);
  return s / static_cast<double>(a.size());
}

double psnr(const Grid<double>& a, const Grid<double>& ref) {
  const double e = mse(a, ref);
  const auto [lo, hi] = range_of(ref);
  if (!(hi > lo)) throw DegenerateRange("PSNR reference is constant");
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10((hi - lo) * (hi - lo) / e);
}

double ssim(const Grid<double>& a, const Grid<double>& ref, const SsimOptions& opt) {
  require_same(a, ref);
  if (opt.window < 1 || opt.window % 2 == 0) throw ConfigError("SSIM window must be odd");
  if (a.rows() < opt.window || a.cols() < opt.window) {
    throw InvalidShape("SSIM needs both dimensions >= the window size");
  }
  auto [lo, hi] = range_of(ref);
  if (opt.union_range) {
    const auto [alo, ahi] = range_of(a);
    lo = std::min(lo, alo);
    hi = std::max(hi, ahi);
  }
  const double range = hi - lo;
  const double c1 = (opt.k1 * range) * (opt.k1 * range);
  const double c2 = (opt.k2 * range) * (opt.k2 * range);

  std::vector<double> k(opt.window);
  const double half = 0.5 * static_cast<double>(opt.window - 1);
  double ks = 0.0;
  for (std::size_t t = 0; t < opt.window; ++t) {
    const double d = static_cast<double>(t) - half;
    k[t] = std::exp(-d * d / (2.0 * opt.sigma * opt.sigma));
    ks += k[t];
  }
  for (double& v : k) v /= ks;

  Grid<double> aa(a.rows(), a.cols()), rr(a.rows(), a.cols()), ar(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    rr[i] = ref[i] * ref[i];
    ar[i] = a[i] * ref[i];
  }
  const auto mu_a = filter_valid(a, k), mu_r = filter_valid(ref, k);
  const auto s_aa = filter_valid(aa, k), s_rr = filter_valid(rr, k), s_ar = filter_valid(ar, k);
  double acc = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mr = mu_r[i];
    const double va = s_aa[i] - ma * ma, vr = s_rr[i] - mr * mr, cov = s_ar[i] - ma * mr;
    const double num = (2.0 * ma * mr + c1) * (2.0 * cov + c2);
    const double den = (ma * ma + mr * mr + c1) * (va + vr + c2);
    acc += den > 0.0 ? num / den : 1.0;
  }
  return acc / static_cast<double>(mu_a.size());
}

MetricReport evaluate(const Grid<double>& a, const Grid<double>& ref, const SsimOptions& opt) {
  return {psnr(a, ref), ssim(a, ref, opt), mse(a, ref)};
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidShape("pearson needs equal lengths >= 2");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw DegenerateRange("pearson of a constant sequence");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace ringfree::metrics
