#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ringfree/grid.hpp"

namespace ringfree {

/// Log-domain projection data. Rows are view angles, columns detector bins.
/// Construction enforces at least 2x2 and finite values.
class Sinogram {
 public:
  Sinogram(std::size_t n_angles, std::size_t n_detectors, double fill = 0.0);
  explicit Sinogram(Grid<double> values);

  std::size_t n_angles() const noexcept { return values_.rows(); }
  std::size_t n_detectors() const noexcept { return values_.cols(); }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return values_(i, j); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  std::span<double> flat() noexcept { return values_.flat(); }
  std::span<const double> flat() const noexcept { return values_.flat(); }

  const Grid<double>& values() const noexcept { return values_; }
  bool same_shape(const Sinogram& o) const noexcept { return values_.same_shape(o.values_); }
  friend bool operator==(const Sinogram&, const Sinogram&) = default;

 private:
  Grid<double> values_;
};

/// Per-pixel non-defective indicator. Defect status is decided per detector
/// column, so every column holds a single value.
class DefectMask {
 public:
  DefectMask(std::size_t n_angles, std::vector<bool> column_ok);

  std::size_t n_angles() const noexcept { return n_angles_; }
  std::size_t n_detectors() const noexcept { return column_ok_.size(); }
  bool good(std::size_t, std::size_t j) const { return column_ok_[j]; }
  bool column_good(std::size_t j) const { return column_ok_[j]; }
  const std::vector<bool>& columns() const noexcept { return column_ok_; }

  std::size_t good_columns() const noexcept;
  std::size_t good_pixels() const noexcept { return good_columns() * n_angles_; }
  std::vector<std::size_t> defective_columns() const;
  /// Row-major flat indices of every non-defective pixel, ascending.
  std::vector<std::uint32_t> good_indices() const;
  Grid<std::uint8_t> to_grid() const;
  /// Throws InvalidShape when the grid is not column-constant.
  static DefectMask from_grid(const Grid<std::uint8_t>& g);

  friend bool operator==(const DefectMask&, const DefectMask&) = default;

 private:
  std::size_t n_angles_;
  std::vector<bool> column_ok_;
};

struct NormParams {
  double lo = 0.0;
  double hi = 1.0;
};

/// perm(i, j) is the source row that lands at sorted position i of column j.
class ColumnPermutation {
 public:
  /// Validates that every column is a bijection; throws InvalidPermutation.
  explicit ColumnPermutation(Grid<std::uint32_t> perm);
  static ColumnPermutation identity(std::size_t n_angles, std::size_t n_detectors);

  std::size_t n_angles() const noexcept { return perm_.rows(); }
  std::size_t n_detectors() const noexcept { return perm_.cols(); }
  std::uint32_t operator()(std::size_t i, std::size_t j) const { return perm_(i, j); }
  const Grid<std::uint32_t>& grid() const noexcept { return perm_; }

  ColumnPermutation inverse() const;
  /// Flat gather indices: sorted pixel (i, j) reads source pixel perm(i, j) * N + j.
  std::vector<std::uint32_t> gather_indices() const;

  friend bool operator==(const ColumnPermutation&, const ColumnPermutation&) = default;

 private:
  Grid<std::uint32_t> perm_;
};

/// Column j is non-defective iff its mean absolute angular difference exceeds mu.
DefectMask detect_defective(const Sinogram& p, double mu = 1e-6);

/// Min-max normalization over non-defective pixels.
std::pair<Sinogram, NormParams> normalize(const Sinogram& p, const DefectMask& mask);
Sinogram denormalize(const Sinogram& p, const NormParams& params);

/// Ascending, stable sort of every column along the angular axis.
std::pair<Sinogram, ColumnPermutation> sort_columns(const Sinogram& s);
ColumnPermutation sort_permutation(std::span<const double> values, std::size_t n_angles,
                                   std::size_t n_detectors);

/// out(i, j) = s(perm(i, j), j)
Sinogram apply_permutation(const Sinogram& s, const ColumnPermutation& perm);

}  // namespace ringfree
