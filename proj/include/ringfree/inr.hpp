#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "ringfree/autodiff.hpp"

namespace ringfree::inr {

inline constexpr std::size_t kLevels = 3;
inline constexpr std::size_t kFeatures = 2;
inline constexpr std::size_t kHidden = 64;
inline constexpr std::size_t kInputWidth = kLevels * kFeatures;
inline constexpr std::array<std::size_t, 5> kWidths = {kInputWidth, kHidden, kHidden, kHidden, 1};
inline constexpr double kInitRange = 1e-4;

/// Vertex counts of one feature grid level (angular x detector).
struct GridLevel {
  std::size_t rows = 0;
  std::size_t cols = 0;
  friend bool operator==(GridLevel, GridLevel) = default;
};

/// Level resolutions ceil(M/4), ceil(3M/8), ceil(M/2) (same for N),
/// never below 2 vertices per axis.
std::array<GridLevel, kLevels> level_resolutions(std::size_t n_angles, std::size_t n_detectors);

/// Multi-resolution feature grid: kLevels grids of kFeatures-vector vertices.
/// Feature arrays are stored vertex-major: value[(r * cols + c) * kFeatures + f].
struct MultiResGrid {
  std::array<GridLevel, kLevels> levels;
  std::array<ad::ParamId, kLevels> features;
};

/// ReLU MLP of widths kWidths; weights are row-major (in x out).
struct Mlp {
  std::array<ad::ParamId, kWidths.size() - 1> weights;
  std::array<ad::ParamId, kWidths.size() - 1> biases;
};

struct StripeField {
  std::size_t rows = 0;
  std::size_t cols = 0;
  ad::ParamId matrix;
};

/// Pixel-center coordinates: x_i = -1 + 2i/(M-1) (angular), y_j = -1 + 2j/(N-1) (detector).
struct CoordGrid {
  std::size_t n_angles = 0;
  std::size_t n_detectors = 0;
  double x(std::size_t i) const { return -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n_angles - 1); }
  double y(std::size_t j) const { return -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(n_detectors - 1); }
};

/// Ideal-sinogram network (grid + MLP) and stripe matrix sharing one store.
struct Model {
  std::size_t n_angles = 0;
  std::size_t n_detectors = 0;
  ad::ParamStore store;
  MultiResGrid grid;
  Mlp mlp;
  StripeField stripe;

  std::vector<ad::ParamId> theta_params() const;
  std::vector<ad::ParamId> phi_params() const { return {stripe.matrix}; }
  CoordGrid coords() const { return {n_angles, n_detectors}; }
  /// sum_l 2*R^a_l*R^d_l + MLP weights and biases + M*N
  std::size_t expected_param_count() const;
};

/// Grid features and stripe entries ~ U(-1e-4, 1e-4); MLP weights Kaiming-uniform
/// (bound sqrt(6 / fan_in)); biases zero.
Model init_params(std::size_t n_angles, std::size_t n_detectors, std::uint64_t seed);

/// Bilinear interpolation weights and vertex indices of one query on one level.
struct BilinearTaps {
  std::array<std::size_t, 4> vertex;
  std::array<double, 4> weight;
};
/// Coordinates outside [-1, 1] are clamped onto the grid boundary.
BilinearTaps bilinear_taps(const GridLevel& level, double x, double y);

std::array<double, kInputWidth> grid_encode(double x, double y, const Model& model);
double theta_forward(double x, double y, const Model& model);
double phi_forward(std::size_t i, std::size_t j, const Model& model);

/// Interpolation stencils of a fixed point set, one per level (n_points x kFeatures outputs).
struct Encoding {
  std::size_t n_points = 0;
  std::array<std::shared_ptr<const ad::Stencil>, kLevels> levels;
};
Encoding build_encoding(const MultiResGrid& grid, std::span<const double> xs,
                        std::span<const double> ys);
/// Every pixel of the coordinate grid, row-major.
Encoding build_pixel_encoding(const Model& model);

/// Records F_theta over the encoding's points; result is n_points x 1.
ad::Var theta_on_tape(ad::Tape& tape, const Model& model, const Encoding& enc);
/// Same computation without a tape.
std::vector<double> theta_batch(const Model& model, const Encoding& enc,
                                kernels::Exec exec = kernels::Exec::Parallel);

/// Checkpoint: "CKPT", u32 version (1), then sections of
/// (u32 name length, name bytes, u32 count, count float64 LE values).
/// The first section, "shape", holds {M, N}.
void write_checkpoint(const Model& model, const std::filesystem::path& path);
Model read_checkpoint(const std::filesystem::path& path);

}  // namespace ringfree::inr
