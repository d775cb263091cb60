#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ringfree/grid.hpp"
#include "ringfree/sinogram.hpp"

namespace ringfree::ct {

/// Flat-detector fan-beam scan over [angle0, angle0 + 2pi).
/// View k has the source at sod * (cos b, sin b), b = angle0 + 2pi k / n_views;
/// bin j sits at offset (j - (n_detectors - 1) / 2) * det_pitch along (-sin b, cos b).
struct FanBeamGeometry {
  double sdd = 416.696;
  double sod = 297.143;
  std::size_t n_detectors = 2068;
  double det_pitch = 0.075;
  std::size_t n_views = 720;
  double angle0 = 0.0;

  static FanBeamGeometry full() { return {}; }
  /// 512 bins, 360 views, same detector width and magnification.
  static FanBeamGeometry desk();

  void validate() const;  // ConfigError
  double view_angle(std::size_t k) const;
  double bin_offset(double j) const;
  /// Radius of the circle covered by every view (rays through the outer bin centers).
  double fov_radius() const;
  /// Pixel size of a size x size image spanning the field-of-view square.
  double pixel_size(std::size_t image_size) const;

  /// {"sdd_mm","sod_mm","n_det","pitch_mm","n_views","angle0"}
  std::string to_json() const;
  static FanBeamGeometry from_json(std::string_view text);  // FormatError / ConfigError
  friend bool operator==(const FanBeamGeometry&, const FanBeamGeometry&) = default;
};

struct Ellipse {
  double cx = 0.0, cy = 0.0;  // mm
  double a = 0.0, b = 0.0;    // semi-axes, mm
  double phi = 0.0;           // rotation, rad
  double value = 0.0;         // additive attenuation, 1/mm

  bool contains(double x, double y) const;
  double extent() const;  // distance from the origin to the farthest point
};

/// Pixel (r, c) of a size x size raster has its center at
/// x = (c - (size - 1) / 2) * pixel_mm, y = (r - (size - 1) / 2) * pixel_mm.
struct EllipsePhantom {
  std::vector<Ellipse> ellipses;
  std::size_t size = 256;
  double pixel_mm = 1.0;

  double value_at(double x, double y) const;
  /// Pixel values at the centers, or box averages of supersample^2 sub-samples.
  Image raster(std::size_t supersample = 1) const;
  double max_value() const;  // largest possible ellipse-sum (all positive overlaps)
};

inline constexpr double kDefaultAttenuation = 0.02;  // 1/mm, scale of the brightest tissue

/// Modified (high-contrast) Shepp-Logan table scaled so the skull spans 92% of
/// the field-of-view radius; values multiplied by `attenuation`.
EllipsePhantom shepp_logan(const FanBeamGeometry& g, std::size_t size,
                           double attenuation = kDefaultAttenuation);
/// One centered disk of radius 0.5 * fov followed by `extra` disks.
EllipsePhantom disks(const FanBeamGeometry& g, std::size_t size, std::vector<Ellipse> extra = {},
                     bool centered = true, double attenuation = kDefaultAttenuation);
/// name in {shepp-logan, disks}; throws ConfigError otherwise.
EllipsePhantom make_phantom(std::string_view name, const FanBeamGeometry& g, std::size_t size);

/// Ray integral of every (view, bin): source to bin center.
Sinogram project_fan_analytic(const std::vector<Ellipse>& ellipses, const FanBeamGeometry& g);
/// Fixed-step (quarter pixel) sampling of the bilinearly interpolated raster.
/// Throws FieldOfViewError when a nonzero pixel lies outside the field of view.
Sinogram project_fan(const Image& raster, double pixel_mm, const FanBeamGeometry& g);
/// Projects the phantom's area-averaged raster.
Sinogram project_fan(const EllipsePhantom& phantom, const FanBeamGeometry& g);
inline constexpr std::size_t kProjectionSupersample = 4;
/// Simulated data come from a phantom raster this many times finer than the image.
inline constexpr std::size_t kProjectionOversample = 2;
/// Projection of the named phantom rasterized at kProjectionOversample * image_size.
Sinogram simulate_projection(std::string_view phantom, const FanBeamGeometry& g,
                             std::size_t image_size);

struct CorruptionSpec {
  double gain_fraction = 0.5;
  double gain_amplitude = 0.1;
  std::size_t dead_begin = 400;  // half-open [dead_begin, dead_end)
  std::size_t dead_end = 405;
  double i0 = 1e5;
  std::uint64_t seed = 0;
  bool noise = true;  // false: expected counts instead of Poisson draws

  static CorruptionSpec desk();
  void validate() const;  // ConfigError
};

struct CorruptionTruth {
  std::vector<double> gains;  // per column, 1 where no gain was applied
  std::vector<std::size_t> gained_columns;
  std::vector<std::size_t> dead_columns;
};

struct Corrupted {
  Sinogram sinogram;
  CorruptionTruth truth;
};

Corrupted corrupt(const Sinogram& p, const CorruptionSpec& spec);

/// Flat-detector fan-beam FBP over a full scan. Output covers the
/// field-of-view square with image_size^2 pixels (see EllipsePhantom).
Image fbp_fan(const Sinogram& p, const FanBeamGeometry& g, std::size_t image_size);
/// Same backprojection loop without threading.
Image fbp_fan_serial(const Sinogram& p, const FanBeamGeometry& g, std::size_t image_size);

/// Column-sorted median filter along the detector axis (edge-replicated), unsorted afterwards.
Sinogram sorted_median_baseline(const Sinogram& p, std::size_t window);

/// Ring radius (image pixels) caused by a constant offset in detector column j.
double ring_radius_px(const FanBeamGeometry& g, double column, std::size_t image_size);

/// Mean value of the image in 1-pixel wide rings about the rotation center.
std::vector<double> radial_profile(const Image& img);

struct RingDetection {
  bool detected = false;
  double peak_radius_px = 0.0;  // radius of the strongest deviation near the query
  double score = 0.0;           // deviation in robust noise units
};

/// Detects a ring in `img` (typically a difference to a reference image): the
/// radial profile is high-passed by a running median, and a ring is reported
/// when the deviation within +-tol_px of radius_px exceeds `threshold` robust
/// standard deviations of the high-passed profile.
RingDetection detect_ring(const Image& img, double radius_px, double tol_px = 2.0,
                          double threshold = 6.0);
/// Radius of the strongest ring over the whole profile.
double strongest_ring_radius(const Image& img);

}  // namespace ringfree::ct
