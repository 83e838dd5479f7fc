#pragma once

// Core grid types and binary PGM (P5) file I/O.
//
// Three pixel grids are used throughout: GrayImage and ProbMask hold
// floating-point values in [0, 1], BinaryMask holds {0, 1}. All three are
// immutable value objects once constructed; constructors reject NaN,
// infinities and out-of-range values. Storage is row-major with the origin
// at the top-left, coordinates ordered (row, col).
//
// On disk, probabilities are quantized to 16 bits (big-endian, maxval
// 65535), gray images and binary masks to 8 bits (maxval 255, binary masks
// written as {0, 255}). Writing is byte-deterministic: identical input
// produces identical files.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace fest {

/// Generic row-major grid. Mutable working buffer; the public mask types
/// below wrap it with validation and a const-only interface.
template <typename T>
class Grid {
 public:
  Grid() = default;

  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width) {
    check_dims(height, width);
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  Grid(int height, int width, std::vector<T> data)
      : height_(height), width_(width), data_(std::move(data)) {
    check_dims(height, width);
    if (data_.size() != static_cast<std::size_t>(height) * width) {
      throw std::invalid_argument("grid data size does not match dimensions");
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  T& at(int r, int c) { return data_[index(r, c)]; }
  const T& at(int r, int c) const { return data_[index(r, c)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool in_bounds(int r, int c) const {
    return r >= 0 && r < height_ && c >= 0 && c < width_;
  }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.data_ == b.data_;
  }

 private:
  static void check_dims(int height, int width) {
    if (height <= 0 || width <= 0) {
      throw std::invalid_argument("grid dimensions must be positive");
    }
  }

  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * width_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

namespace detail {

inline void validate_unit_range(const std::vector<double>& values,
                                const char* what) {
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw std::invalid_argument(std::string(what) +
                                  ": values must be finite and in [0, 1]");
    }
  }
}

inline void validate_binary(const std::vector<std::uint8_t>& values) {
  for (std::uint8_t v : values) {
    if (v > 1) {
      throw std::invalid_argument("BinaryMask: values must be 0 or 1");
    }
  }
}

}  // namespace detail

/// Per-pixel intensity in [0, 1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int height, int width, std::vector<double> values)
      : grid_(height, width, std::move(values)) {
    detail::validate_unit_range(grid_.data(), "GrayImage");
  }
  explicit GrayImage(Grid<double> g) : grid_(std::move(g)) {
    detail::validate_unit_range(grid_.data(), "GrayImage");
  }

  int height() const { return grid_.height(); }
  int width() const { return grid_.width(); }
  std::size_t size() const { return grid_.size(); }
  double at(int r, int c) const { return grid_.at(r, c); }
  double operator[](std::size_t i) const { return grid_[i]; }
  const std::vector<double>& data() const { return grid_.data(); }
  const Grid<double>& grid() const { return grid_; }

  friend bool operator==(const GrayImage& a, const GrayImage& b) {
    return a.grid_ == b.grid_;
  }

 private:
  Grid<double> grid_;
};

/// Per-pixel target confidence in [0, 1].
class ProbMask {
 public:
  ProbMask() = default;
  ProbMask(int height, int width, std::vector<double> values)
      : grid_(height, width, std::move(values)) {
    detail::validate_unit_range(grid_.data(), "ProbMask");
  }
  explicit ProbMask(Grid<double> g) : grid_(std::move(g)) {
    detail::validate_unit_range(grid_.data(), "ProbMask");
  }

  int height() const { return grid_.height(); }
  int width() const { return grid_.width(); }
  std::size_t size() const { return grid_.size(); }
  double at(int r, int c) const { return grid_.at(r, c); }
  double operator[](std::size_t i) const { return grid_[i]; }
  const std::vector<double>& data() const { return grid_.data(); }
  const Grid<double>& grid() const { return grid_; }

  friend bool operator==(const ProbMask& a, const ProbMask& b) {
    return a.grid_ == b.grid_;
  }

 private:
  Grid<double> grid_;
};

/// Per-pixel {0, 1} mask: ground truth labels, thresholded and final masks.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, std::vector<std::uint8_t> values)
      : grid_(height, width, std::move(values)) {
    detail::validate_binary(grid_.data());
  }
  explicit BinaryMask(Grid<std::uint8_t> g) : grid_(std::move(g)) {
    detail::validate_binary(grid_.data());
  }

  int height() const { return grid_.height(); }
  int width() const { return grid_.width(); }
  std::size_t size() const { return grid_.size(); }
  std::uint8_t at(int r, int c) const { return grid_.at(r, c); }
  std::uint8_t operator[](std::size_t i) const { return grid_[i]; }
  const std::vector<std::uint8_t>& data() const { return grid_.data(); }
  const Grid<std::uint8_t>& grid() const { return grid_; }

  std::int64_t foreground_count() const {
    std::int64_t n = 0;
    for (std::uint8_t v : grid_.data()) n += v;
    return n;
  }

  friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
    return a.grid_ == b.grid_;
  }

 private:
  Grid<std::uint8_t> grid_;
};

enum class MaskKind { gray8, gray16, binary8 };

struct RasterHeader {
  int height = 0;
  int width = 0;
  int maxval = 0;  // 255 or 65535
};

namespace detail {

inline int pgm_read_token(std::istream& in, const std::string& path) {
  // Skip whitespace and '#' comments, then read one non-negative integer.
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (!std::isspace(ch)) {
      break;
    }
    ch = in.get();
  }
  if (ch == EOF || !std::isdigit(ch)) {
    throw std::runtime_error("malformed PGM header: " + path);
  }
  long value = 0;
  while (ch != EOF && std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    if (value > 1 << 30) {
      throw std::runtime_error("malformed PGM header: " + path);
    }
    ch = in.get();
  }
  if (ch != EOF) in.unget();
  return static_cast<int>(value);
}

struct PgmFile {
  RasterHeader header;
  std::vector<std::uint8_t> payload;
};

inline PgmFile read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path.string());
  }
  const std::string name = path.string();
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '5') {
    throw std::runtime_error("not a binary PGM (P5): " + name);
  }
  PgmFile file;
  file.header.width = pgm_read_token(in, name);
  file.header.height = pgm_read_token(in, name);
  file.header.maxval = pgm_read_token(in, name);
  if (file.header.width <= 0 || file.header.height <= 0) {
    throw std::runtime_error("malformed PGM header: " + name);
  }
  if (file.header.maxval != 255 && file.header.maxval != 65535) {
    throw std::runtime_error("unsupported PGM maxval: " + name);
  }
  // Exactly one whitespace byte separates the header from the payload.
  int sep = in.get();
  if (sep == EOF || !std::isspace(sep)) {
    throw std::runtime_error("malformed PGM header: " + name);
  }
  const std::size_t bytes_per_sample = file.header.maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(file.header.width) *
                        file.header.height * bytes_per_sample;
  file.payload.resize(n);
  in.read(reinterpret_cast<char*>(file.payload.data()),
          static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw std::runtime_error("truncated PGM payload: " + name);
  }
  return file;
}

inline void write_pgm(const std::filesystem::path& path, int height, int width,
                      int maxval, const std::vector<std::uint8_t>& payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write file: " + path.string());
  }
  out << "P5\n" << width << " " << height << "\n" << maxval << "\n";
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

inline void require_maxval(const PgmFile& file, int expected,
                           const std::filesystem::path& path) {
  if (file.header.maxval != expected) {
    throw std::runtime_error("PGM maxval " +
                             std::to_string(file.header.maxval) +
                             " does not match requested kind: " +
                             path.string());
  }
}

}  // namespace detail

inline GrayImage read_gray_image(const std::filesystem::path& path) {
  const auto file = detail::read_pgm(path);
  detail::require_maxval(file, 255, path);
  std::vector<double> values(file.payload.size());
  for (std::size_t i = 0; i < file.payload.size(); ++i) {
    values[i] = file.payload[i] / 255.0;
  }
  return GrayImage(file.header.height, file.header.width, std::move(values));
}

inline ProbMask read_prob_mask(const std::filesystem::path& path) {
  const auto file = detail::read_pgm(path);
  detail::require_maxval(file, 65535, path);
  std::vector<double> values(file.payload.size() / 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const unsigned hi = file.payload[2 * i];
    const unsigned lo = file.payload[2 * i + 1];
    values[i] = ((hi << 8) | lo) / 65535.0;
  }
  return ProbMask(file.header.height, file.header.width, std::move(values));
}

inline BinaryMask read_binary_mask(const std::filesystem::path& path) {
  const auto file = detail::read_pgm(path);
  detail::require_maxval(file, 255, path);
  std::vector<std::uint8_t> values(file.payload.size());
  for (std::size_t i = 0; i < file.payload.size(); ++i) {
    values[i] = file.payload[i] ? 1 : 0;
  }
  return BinaryMask(file.header.height, file.header.width, std::move(values));
}

inline void write_mask(const GrayImage& m, const std::filesystem::path& path) {
  std::vector<std::uint8_t> payload(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    payload[i] = static_cast<std::uint8_t>(std::lround(m[i] * 255.0));
  }
  detail::write_pgm(path, m.height(), m.width(), 255, payload);
}

inline void write_mask(const ProbMask& m, const std::filesystem::path& path) {
  std::vector<std::uint8_t> payload(m.size() * 2);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto q = static_cast<unsigned>(std::lround(m[i] * 65535.0));
    payload[2 * i] = static_cast<std::uint8_t>(q >> 8);
    payload[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
  }
  detail::write_pgm(path, m.height(), m.width(), 65535, payload);
}

inline void write_mask(const BinaryMask& m, const std::filesystem::path& path) {
  std::vector<std::uint8_t> payload(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    payload[i] = m[i] ? 255 : 0;
  }
  detail::write_pgm(path, m.height(), m.width(), 255, payload);
}

using MaskVariant = std::variant<GrayImage, ProbMask, BinaryMask>;

inline MaskVariant read_mask(const std::filesystem::path& path, MaskKind kind) {
  switch (kind) {
    case MaskKind::gray8:
      return read_gray_image(path);
    case MaskKind::gray16:
      return read_prob_mask(path);
    case MaskKind::binary8:
      return read_binary_mask(path);
  }
  throw std::invalid_argument("unknown mask kind");
}

}  // namespace fest
