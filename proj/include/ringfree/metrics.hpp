#pragma once

#include <string>

#include "ringfree/grid.hpp"

namespace ringfree::metrics {

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  /// Dynamic range from the union of both inputs instead of the reference alone.
  bool union_range = false;
};

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  double mse = 0.0;
  /// {"psnr_db":...,"ssim":...,"mse":...}; an infinite PSNR is written as "inf".
  std::string to_json() const;
};

double mse(const Grid<double>& a, const Grid<double>& ref);
/// 10 log10(peak^2 / MSE), peak = max(ref) - min(ref); +inf when MSE = 0.
double psnr(const Grid<double>& a, const Grid<double>& ref);
/// Mean SSIM over all fully covered window positions.
double ssim(const Grid<double>& a, const Grid<double>& ref, const SsimOptions& opt = {});
MetricReport evaluate(const Grid<double>& a, const Grid<double>& ref, const SsimOptions& opt = {});

/// Pearson correlation of two equally long sequences.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace ringfree::metrics
