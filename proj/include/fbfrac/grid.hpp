#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fbfrac/error.hpp"

namespace fbfrac {

/// Row-major 2-D field of real intensities. Row index i runs along the x lattice
/// direction, column index j along y. Values are unclamped; only PGM export clamps.
class ImageGrid {
 public:
  ImageGrid() = default;

  ImageGrid(std::size_t rows, std::size_t cols, double value = 0.0, double h = 1.0)
      : rows_(rows), cols_(cols), h_(h), data_(rows * cols, value) {
    check_shape();
    check_finite();
  }

  ImageGrid(std::size_t rows, std::size_t cols, std::vector<double> data, double h = 1.0)
      : rows_(rows), cols_(cols), h_(h), data_(std::move(data)) {
    check_shape();
    if (data_.size() != rows_ * cols_) {
      throw ValidationError("ImageGrid: data length " + std::to_string(data_.size()) +
                            " != rows*cols " + std::to_string(rows_ * cols_));
    }
    check_finite();
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  double h() const noexcept { return h_; }
  void set_h(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("ImageGrid: h must be positive");
    h_ = h;
  }

  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }
  const double* row(std::size_t i) const noexcept { return data_.data() + i * cols_; }
  double* row(std::size_t i) noexcept { return data_.data() + i * cols_; }

  bool same_shape(const ImageGrid& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  double min() const { return *std::min_element(data_.begin(), data_.end()); }
  double max() const { return *std::max_element(data_.begin(), data_.end()); }
  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  ImageGrid& operator+=(const ImageGrid& o) {
    require_same_shape(o, "operator+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  ImageGrid& operator-=(const ImageGrid& o) {
    require_same_shape(o, "operator-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  ImageGrid& operator*=(double a) {
    for (double& v : data_) v *= a;
    return *this;
  }

  friend ImageGrid operator+(ImageGrid a, const ImageGrid& b) { return a += b; }
  friend ImageGrid operator-(ImageGrid a, const ImageGrid& b) { return a -= b; }
  friend ImageGrid operator*(double s, ImageGrid a) { return a *= s; }
  friend ImageGrid operator-(ImageGrid a) { return a *= -1.0; }

  friend bool operator==(const ImageGrid& a, const ImageGrid& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.h_ == b.h_ && a.data_ == b.data_;
  }

  void require_same_shape(const ImageGrid& o, const char* where) const {
    if (!same_shape(o)) {
      throw ValidationError(std::string(where) + ": dimension mismatch " + shape_str() +
                            " vs " + o.shape_str());
    }
  }

  std::string shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

 private:
  void check_shape() const {
    if (rows_ < 2 || cols_ < 2) {
      throw ValidationError("ImageGrid: rows and cols must be >= 2, got " + shape_str());
    }
    if (!(h_ > 0.0) || !std::isfinite(h_)) throw ValidationError("ImageGrid: h must be positive");
  }
  void check_finite() const {
    if (!all_finite()) throw ValidationError("ImageGrid: non-finite entry");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  double h_ = 1.0;
  std::vector<double> data_;
};

inline double mean(const ImageGrid& g) {
  double s = 0.0;
  for (double v : g.values()) s += v;
  return s / static_cast<double>(g.size());
}

/// Discrete L2 distance sqrt(h^2 * sum (a-b)^2).
inline double l2_distance(const ImageGrid& a, const ImageGrid& b) {
  a.require_same_shape(b, "l2_distance");
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < av.size(); ++k) {
    const double d = av[k] - bv[k];
    s += d * d;
  }
  return std::sqrt(a.h() * a.h() * s);
}

/// h^2-weighted inner product.
inline double inner(const ImageGrid& a, const ImageGrid& b) {
  a.require_same_shape(b, "inner");
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < av.size(); ++k) s += av[k] * bv[k];
  return a.h() * a.h() * s;
}

inline double l2_norm(const ImageGrid& a) { return std::sqrt(inner(a, a)); }

// ---------------------------------------------------------------------------
// PGM I/O

class PgmError : public IoError {
 public:
  enum class Kind { open_failed, malformed_header, unsupported_depth, truncated_payload, write_failed };
  PgmError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

struct PgmCursor {
  const std::string& buf;
  std::size_t pos = 0;

  void skip_space_and_comments() {
    while (pos < buf.size()) {
      const auto c = static_cast<unsigned char>(buf[pos]);
      if (c == '#') {
        while (pos < buf.size() && buf[pos] != '\n' && buf[pos] != '\r') ++pos;
      } else if (std::isspace(c)) {
        ++pos;
      } else {
        break;
      }
    }
  }

  bool read_uint(const std::string& path, const char* what, unsigned long& out) {
    skip_space_and_comments();
    const std::size_t start = pos;
    while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) ++pos;
    if (start == pos) return false;
    if (pos - start > 9) {
      throw PgmError(PgmError::Kind::malformed_header,
                     path + ": malformed PGM header (" + what + " too large)");
    }
    out = std::stoul(buf.substr(start, pos - start));
    return true;
  }
};

}  // namespace detail

/// Reads an 8-bit grayscale PGM (P2 or P5). h is set to 1.
inline ImageGrid load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PgmError(PgmError::Kind::open_failed, path + ": cannot open for reading");
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < 2 || buf[0] != 'P' || (buf[1] != '2' && buf[1] != '5')) {
    throw PgmError(PgmError::Kind::malformed_header, path + ": malformed PGM header (magic must be P2 or P5)");
  }
  const bool binary = buf[1] == '5';
  detail::PgmCursor cur{buf, 2};
  if (cur.pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[cur.pos])) && buf[cur.pos] != '#') {
    throw PgmError(PgmError::Kind::malformed_header, path + ": malformed PGM header (bad magic)");
  }
  unsigned long width = 0, height = 0, maxval = 0;
  if (!cur.read_uint(path, "width", width) || !cur.read_uint(path, "height", height) ||
      !cur.read_uint(path, "maxval", maxval)) {
    throw PgmError(PgmError::Kind::malformed_header, path + ": malformed PGM header (expected width height maxval)");
  }
  if (width < 2 || height < 2) {
    throw PgmError(PgmError::Kind::malformed_header,
                   path + ": malformed PGM header (image must be at least 2x2)");
  }
  if (maxval != 255) {
    throw PgmError(PgmError::Kind::unsupported_depth,
                   path + ": unsupported PGM depth (maxval " + std::to_string(maxval) + ", expected 255)");
  }
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<double> data;
  data.reserve(n);

  if (binary) {
    // Exactly one whitespace byte separates maxval from the raster.
    if (cur.pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[cur.pos]))) {
      throw PgmError(PgmError::Kind::truncated_payload, path + ": truncated PGM payload (no raster)");
    }
    ++cur.pos;
    const std::size_t avail = buf.size() - cur.pos;
    if (avail < n) {
      throw PgmError(PgmError::Kind::truncated_payload,
                     path + ": truncated PGM payload (" + std::to_string(avail) + " of " +
                         std::to_string(n) + " bytes)");
    }
    for (std::size_t k = 0; k < n; ++k) {
      data.push_back(static_cast<double>(static_cast<unsigned char>(buf[cur.pos + k])));
    }
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      unsigned long v = 0;
      if (!cur.read_uint(path, "sample", v)) {
        cur.skip_space_and_comments();
        if (cur.pos >= buf.size()) {
          throw PgmError(PgmError::Kind::truncated_payload,
                         path + ": truncated PGM payload (" + std::to_string(k) + " of " +
                             std::to_string(n) + " samples)");
        }
        throw PgmError(PgmError::Kind::malformed_header, path + ": malformed PGM sample");
      }
      if (v > 255) throw PgmError(PgmError::Kind::malformed_header, path + ": PGM sample exceeds maxval");
      data.push_back(static_cast<double>(v));
    }
  }
  return ImageGrid(height, width, std::move(data), 1.0);
}

/// Clamp to [0,255] then round half up.
inline std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 255.0);
  return static_cast<std::uint8_t>(std::floor(c + 0.5));
}

/// Writes binary P5. Values are clamped to [0,255] and rounded half up.
inline void save_pgm(const ImageGrid& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PgmError(PgmError::Kind::write_failed, path + ": cannot open for writing");
  out << "P5\n" << g.cols() << ' ' << g.rows() << "\n255\n";
  std::vector<char> bytes(g.size());
  auto v = g.values();
  for (std::size_t k = 0; k < v.size(); ++k) bytes[k] = static_cast<char>(to_byte(v[k]));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PgmError(PgmError::Kind::write_failed, path + ": write failed");
}

/// Clamp-and-round applied in memory, i.e. what load_pgm(save_pgm(g)) returns.
inline ImageGrid quantize(const ImageGrid& g) {
  ImageGrid q = g;
  for (double& v : q.values()) v = static_cast<double>(to_byte(v));
  q.set_h(1.0);
  return q;
}

}  // namespace fbfrac
