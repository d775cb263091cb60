#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ringfree/grid.hpp"
#include "ringfree/sinogram.hpp"

namespace ringfree::io {

// Every file is: 4-byte ASCII magic, u32 LE rows, u32 LE cols, payload.
//   SGM1  sinogram, float32 LE row-major (angle-major)
//   MSK1  defect mask, one byte per pixel (1 = non-defective)
//   IMG1  image, float32 LE row-major

void write_sinogram(const Sinogram& s, const std::filesystem::path& path);
Sinogram read_sinogram(const std::filesystem::path& path);

void write_mask(const DefectMask& m, const std::filesystem::path& path);
DefectMask read_mask(const std::filesystem::path& path);

void write_image(const Image& img, const std::filesystem::path& path);
Image read_image(const std::filesystem::path& path);

/// Reads any float32 grid file (SGM1 or IMG1) without sinogram validation.
Grid<double> read_float_grid(const std::filesystem::path& path, std::string* magic = nullptr);

/// 16-bit binary PGM (P5, maxval 65535, big-endian), [lo, hi] mapped
/// linearly onto [0, 65535] with clamping. Width = cols, height = rows.
void export_pgm(const Grid<double>& g, double lo, double hi, const std::filesystem::path& path);

struct PgmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::uint32_t maxval = 0;
  std::vector<std::uint16_t> samples;
};
PgmImage read_pgm(const std::filesystem::path& path);

/// First four bytes of a file; throws IoError if unreadable.
std::string peek_magic(const std::filesystem::path& path);

}  // namespace ringfree::io
