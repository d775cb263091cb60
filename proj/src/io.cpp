#include "ringfree/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <vector>

#include "ringfree/error.hpp"

namespace ringfree::io {

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void put_u32(std::vector<char>& b, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) b.push_back(static_cast<char>((v >> (8 * k)) & 0xffu));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

struct Header {
  std::size_t rows;
  std::size_t cols;
};

std::vector<char> make_header(const char* magic, std::size_t rows, std::size_t cols) {
  if (rows > std::numeric_limits<std::uint32_t>::max() ||
      cols > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError("shape does not fit a 32-bit header");
  }
  std::vector<char> b(magic, magic + 4);
  put_u32(b, static_cast<std::uint32_t>(rows));
  put_u32(b, static_cast<std::uint32_t>(cols));
  return b;
}

Header parse_header(const std::vector<char>& bytes, const char* magic, std::size_t elem_size,
                    const std::filesystem::path& path) {
  if (bytes.size() < 12) throw FormatError(path.string() + ": truncated header");
  if (std::memcmp(bytes.data(), magic, 4) != 0) {
    throw FormatError(path.string() + ": bad magic, expected " + std::string(magic, 4));
  }
  const std::uint64_t rows = get_u32(bytes.data() + 4);
  const std::uint64_t cols = get_u32(bytes.data() + 8);
  const std::uint64_t count = rows * cols;  // cannot overflow 64 bits from two u32s
  if (count > (std::numeric_limits<std::uint64_t>::max() - 12) / elem_size) {
    throw FormatError(path.string() + ": shape overflow");
  }
  if (bytes.size() - 12 != count * elem_size) {
    throw FormatError(path.string() + ": payload length " + std::to_string(bytes.size() - 12) +
                      " does not match header " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  }
  return {static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)};
}

void write_floats(const char* magic, const Grid<double>& g, const std::filesystem::path& path) {
  auto b = make_header(magic, g.rows(), g.cols());
  b.reserve(12 + 4 * g.size());
  for (double v : g.flat()) {
    const float f = static_cast<float>(v);
    char tmp[4];
    std::memcpy(tmp, &f, 4);
    b.insert(b.end(), tmp, tmp + 4);
  }
  dump(path, b);
}

Grid<double> parse_floats(const std::vector<char>& bytes, const char* magic,
                          const std::filesystem::path& path) {
  const Header h = parse_header(bytes, magic, 4, path);
  Grid<double> g(h.rows, h.cols);
  const char* p = bytes.data() + 12;
  for (std::size_t k = 0; k < g.size(); ++k, p += 4) {
    float f;
    std::memcpy(&f, p, 4);
    g[k] = f;
  }
  return g;
}

}  // namespace

std::string peek_magic(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char m[4] = {};
  in.read(m, 4);
  if (in.gcount() != 4) throw FormatError(path.string() + ": truncated header");
  return std::string(m, 4);
}

void write_sinogram(const Sinogram& s, const std::filesystem::path& path) {
  write_floats("SGM1", s.values(), path);
}

Sinogram read_sinogram(const std::filesystem::path& path) {
  auto g = parse_floats(slurp(path), "SGM1", path);
  try {
    return Sinogram(std::move(g));
  } catch (const Error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_mask(const DefectMask& m, const std::filesystem::path& path) {
  const auto g = m.to_grid();
  auto b = make_header("MSK1", g.rows(), g.cols());
  for (std::uint8_t v : g.flat()) b.push_back(static_cast<char>(v));
  dump(path, b);
}

DefectMask read_mask(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const Header h = parse_header(bytes, "MSK1", 1, path);
  Grid<std::uint8_t> g(h.rows, h.cols);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto v = static_cast<std::uint8_t>(bytes[12 + k]);
    if (v > 1) throw FormatError(path.string() + ": mask bytes must be 0 or 1");
    g[k] = v;
  }
  try {
    return DefectMask::from_grid(g);
  } catch (const Error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_image(const Image& img, const std::filesystem::path& path) {
  write_floats("IMG1", img, path);
}

Image read_image(const std::filesystem::path& path) {
  return parse_floats(slurp(path), "IMG1", path);
}

Grid<double> read_float_grid(const std::filesystem::path& path, std::string* magic) {
  const auto bytes = slurp(path);
  if (bytes.size() < 4) throw FormatError(path.string() + ": truncated header");
  const std::string m(bytes.data(), 4);
  if (magic) *magic = m;
  if (m != "SGM1" && m != "IMG1") throw FormatError(path.string() + ": not a float grid file");
  return parse_floats(bytes, m.c_str(), path);
}

}  // namespace ringfree::io

namespace ringfree::io {

void export_pgm(const Grid<double>& g, double lo, double hi, const std::filesystem::path& path) {
  if (!(lo < hi)) throw ConfigError("PGM window needs lo < hi");
  const std::string header =
      "P5\n" + std::to_string(g.cols()) + " " + std::to_string(g.rows()) + "\n65535\n";
  std::vector<char> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + 2 * g.size());
  for (double v : g.flat()) {
    const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    const auto s = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    bytes.push_back(static_cast<char>(s >> 8));
    bytes.push_back(static_cast<char>(s & 0xff));
  }
  dump(path, bytes);
}

PgmImage read_pgm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) t += bytes[pos++];
    return t;
  };
  if (token() != "P5") throw FormatError(path.string() + ": not a binary PGM");
  PgmImage img;
  try {
    img.width = std::stoul(token());
    img.height = std::stoul(token());
    img.maxval = static_cast<std::uint32_t>(std::stoul(token()));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed PGM header");
  }
  ++pos;
  const std::size_t bps = img.maxval > 255 ? 2 : 1;
  if (bytes.size() - pos != img.width * img.height * bps) {
    throw FormatError(path.string() + ": PGM payload length mismatch");
  }
  img.samples.resize(img.width * img.height);
  for (std::size_t k = 0; k < img.samples.size(); ++k) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos + k * bps);
    img.samples[k] = bps == 2 ? static_cast<std::uint16_t>((p[0] << 8) | p[1]) : p[0];
  }
  return img;
}

}  // namespace ringfree::io
