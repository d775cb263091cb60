#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "ringfree/sinogram.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed at scope exit.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ringfree-test-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline ringfree::Sinogram random_sinogram(std::size_t m, std::size_t n, std::uint64_t seed,
                                          double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  ringfree::Sinogram s(m, n);
  for (auto& v : s.flat()) v = u(rng);
  return s;
}

}  // namespace testing
