#include "ringfree/sinogram.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ringfree/error.hpp"

namespace ringfree {

namespace {

void check_shape(std::size_t m, std::size_t n) {
  if (m < 2 || n < 2) {
    throw InvalidShape("sinogram must be at least 2x2, got " + std::to_string(m) + "x" +
                       std::to_string(n));
  }
}

}  // namespace

Sinogram::Sinogram(std::size_t n_angles, std::size_t n_detectors, double fill)
    : values_(n_angles, n_detectors, fill) {
  check_shape(n_angles, n_detectors);
  if (!std::isfinite(fill)) throw FormatError("sinogram values must be finite");
}

Sinogram::Sinogram(Grid<double> values) : values_(std::move(values)) {
  check_shape(values_.rows(), values_.cols());
  for (double v : values_.flat()) {
    if (!std::isfinite(v)) throw FormatError("sinogram values must be finite");
  }
}

DefectMask::DefectMask(std::size_t n_angles, std::vector<bool> column_ok)
    : n_angles_(n_angles), column_ok_(std::move(column_ok)) {}

std::size_t DefectMask::good_columns() const noexcept {
  return static_cast<std::size_t>(std::count(column_ok_.begin(), column_ok_.end(), true));
}

std::vector<std::size_t> DefectMask::defective_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < column_ok_.size(); ++j) {
    if (!column_ok_[j]) out.push_back(j);
  }
  return out;
}

std::vector<std::uint32_t> DefectMask::good_indices() const {
  const std::size_t n = column_ok_.size();
  std::vector<std::uint32_t> out;
  out.reserve(good_pixels());
  for (std::size_t i = 0; i < n_angles_; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (column_ok_[j]) out.push_back(static_cast<std::uint32_t>(i * n + j));
    }
  }
  return out;
}

Grid<std::uint8_t> DefectMask::to_grid() const {
  Grid<std::uint8_t> g(n_angles_, column_ok_.size());
  for (std::size_t i = 0; i < n_angles_; ++i) {
    for (std::size_t j = 0; j < column_ok_.size(); ++j) g(i, j) = column_ok_[j] ? 1 : 0;
  }
  return g;
}

DefectMask DefectMask::from_grid(const Grid<std::uint8_t>& g) {
  std::vector<bool> cols(g.cols());
  for (std::size_t j = 0; j < g.cols(); ++j) {
    cols[j] = g.rows() > 0 && g(0, j) != 0;
    for (std::size_t i = 1; i < g.rows(); ++i) {
      if ((g(i, j) != 0) != cols[j]) {
        throw InvalidShape("mask column " + std::to_string(j) + " is not constant");
      }
    }
  }
  return DefectMask(g.rows(), std::move(cols));
}

ColumnPermutation::ColumnPermutation(Grid<std::uint32_t> perm) : perm_(std::move(perm)) {
  const std::size_t m = perm_.rows();
  std::vector<char> seen(m);
  for (std::size_t j = 0; j < perm_.cols(); ++j) {
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t i = 0; i < m; ++i) {
      const std::uint32_t src = perm_(i, j);
      if (src >= m) {
        throw InvalidPermutation("index " + std::to_string(src) + " out of range in column " +
                                 std::to_string(j));
      }
      if (seen[src]) {
        throw InvalidPermutation("column " + std::to_string(j) + " is not a bijection");
      }
      seen[src] = 1;
    }
  }
}

ColumnPermutation ColumnPermutation::identity(std::size_t n_angles, std::size_t n_detectors) {
  Grid<std::uint32_t> g(n_angles, n_detectors);
  for (std::size_t i = 0; i < n_angles; ++i) {
    for (std::size_t j = 0; j < n_detectors; ++j) g(i, j) = static_cast<std::uint32_t>(i);
  }
  return ColumnPermutation(std::move(g));
}

ColumnPermutation ColumnPermutation::inverse() const {
  Grid<std::uint32_t> inv(perm_.rows(), perm_.cols());
  for (std::size_t i = 0; i < perm_.rows(); ++i) {
    for (std::size_t j = 0; j < perm_.cols(); ++j) inv(perm_(i, j), j) = static_cast<std::uint32_t>(i);
  }
  return ColumnPermutation(std::move(inv));
}

std::vector<std::uint32_t> ColumnPermutation::gather_indices() const {
  const std::size_t n = perm_.cols();
  std::vector<std::uint32_t> idx(perm_.size());
  for (std::size_t i = 0; i < perm_.rows(); ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      idx[i * n + j] = static_cast<std::uint32_t>(perm_(i, j) * n + j);
    }
  }
  return idx;
}

DefectMask detect_defective(const Sinogram& p, double mu) {
  const std::size_t m = p.n_angles();
  const std::size_t n = p.n_detectors();
  if (m < 2) throw InvalidShape("defect detection needs at least 2 view angles");
  if (!(mu > 0.0)) throw ConfigError("defect threshold mu must be positive");
  std::vector<bool> ok(n);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < m; ++k) acc += std::abs(p(k, j) - p(k + 1, j));
    ok[j] = acc / static_cast<double>(m - 1) > mu;
  }
  return DefectMask(m, std::move(ok));
}

std::pair<Sinogram, NormParams> normalize(const Sinogram& p, const DefectMask& mask) {
  if (mask.n_angles() != p.n_angles() || mask.n_detectors() != p.n_detectors()) {
    throw InvalidShape("mask shape does not match sinogram");
  }
  if (mask.good_columns() == 0) throw EmptyMask("no non-defective pixels to normalize over");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < p.n_angles(); ++i) {
    for (std::size_t j = 0; j < p.n_detectors(); ++j) {
      if (!mask.column_good(j)) continue;
      lo = std::min(lo, p(i, j));
      hi = std::max(hi, p(i, j));
    }
  }
  if (!(hi > lo)) throw DegenerateRange("non-defective pixels span an empty range");
  const double span = hi - lo;
  Sinogram out(p.n_angles(), p.n_detectors());
  auto src = p.flat();
  auto dst = out.flat();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = (src[k] - lo) / span;
  return {std::move(out), NormParams{lo, hi}};
}

Sinogram denormalize(const Sinogram& p, const NormParams& params) {
  const double span = params.hi - params.lo;
  Sinogram out(p.n_angles(), p.n_detectors());
  auto src = p.flat();
  auto dst = out.flat();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = params.lo + src[k] * span;
  return out;
}

ColumnPermutation sort_permutation(std::span<const double> values, std::size_t n_angles,
                                   std::size_t n_detectors) {
  Grid<std::uint32_t> perm(n_angles, n_detectors);
  std::vector<std::uint32_t> order(n_angles);
  for (std::size_t j = 0; j < n_detectors; ++j) {
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return values[a * n_detectors + j] < values[b * n_detectors + j];
    });
    for (std::size_t i = 0; i < n_angles; ++i) perm(i, j) = order[i];
  }
  return ColumnPermutation(std::move(perm));
}

std::pair<Sinogram, ColumnPermutation> sort_columns(const Sinogram& s) {
  auto perm = sort_permutation(s.flat(), s.n_angles(), s.n_detectors());
  auto sorted = apply_permutation(s, perm);
  return {std::move(sorted), std::move(perm)};
}

Sinogram apply_permutation(const Sinogram& s, const ColumnPermutation& perm) {
  if (perm.n_angles() != s.n_angles() || perm.n_detectors() != s.n_detectors()) {
    throw InvalidShape("permutation shape does not match sinogram");
  }
  Sinogram out(s.n_angles(), s.n_detectors());
  for (std::size_t i = 0; i < s.n_angles(); ++i) {
    for (std::size_t j = 0; j < s.n_detectors(); ++j) out(i, j) = s(perm(i, j), j);
  }
  return out;
}

}  // namespace ringfree
