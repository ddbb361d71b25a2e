#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fbfrac/error.hpp"
#include "fbfrac/grid.hpp"

namespace fbfrac {

enum class KernelKind { identity, average, disk, motion, custom };

inline std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::identity: return "identity";
    case KernelKind::average: return "average";
    case KernelKind::disk: return "disk";
    case KernelKind::motion: return "motion";
    case KernelKind::custom: return "custom";
  }
  return "?";
}

/// Odd-sized, centered, nonnegative correlation stencil summing to one.
struct BlurKernel {
  std::size_t kh = 1;
  std::size_t kw = 1;
  std::vector<double> weights{1.0};
  KernelKind kind = KernelKind::identity;
  double param1 = 0.0;  // average: n, disk: radius, motion: length
  double param2 = 0.0;  // motion: angle (radians)

  int half_h() const noexcept { return static_cast<int>(kh / 2); }
  int half_w() const noexcept { return static_cast<int>(kw / 2); }
  /// Weight at centered offset (a,b), a along rows, b along columns.
  double at(int a, int b) const noexcept {
    return weights[static_cast<std::size_t>(a + half_h()) * kw + static_cast<std::size_t>(b + half_w())];
  }
  double sum() const noexcept {
    double s = 0.0;
    for (double v : weights) s += v;
    return s;
  }
  std::string describe() const;
};

/// Sub-samples per pixel edge used by the coverage estimators.
inline constexpr int kCoverageSubsamples = 16;

namespace detail {

inline BlurKernel normalized(std::size_t kh, std::size_t kw, std::vector<double> w, KernelKind kind,
                             double p1, double p2) {
  double s = 0.0;
  for (double v : w) s += v;
  if (!(s > 0.0)) throw ValidationError("blur kernel has zero total weight");
  for (double& v : w) v /= s;
  return BlurKernel{kh, kw, std::move(w), kind, p1, p2};
}

// Drops all-zero outer rows/columns in symmetric pairs so the anchor stays centered.
inline BlurKernel trim_symmetric(BlurKernel k) {
  auto row_zero = [&](std::size_t r) {
    for (std::size_t c = 0; c < k.kw; ++c)
      if (k.weights[r * k.kw + c] != 0.0) return false;
    return true;
  };
  auto col_zero = [&](std::size_t c) {
    for (std::size_t r = 0; r < k.kh; ++r)
      if (k.weights[r * k.kw + c] != 0.0) return false;
    return true;
  };
  std::size_t tr = 0, tc = 0;
  while (k.kh - 2 * tr > 1 && row_zero(tr) && row_zero(k.kh - 1 - tr)) ++tr;
  while (k.kw - 2 * tc > 1 && col_zero(tc) && col_zero(k.kw - 1 - tc)) ++tc;
  if (tr == 0 && tc == 0) return k;
  const std::size_t nh = k.kh - 2 * tr, nw = k.kw - 2 * tc;
  std::vector<double> w(nh * nw);
  for (std::size_t r = 0; r < nh; ++r)
    for (std::size_t c = 0; c < nw; ++c) w[r * nw + c] = k.weights[(r + tr) * k.kw + (c + tc)];
  k.kh = nh;
  k.kw = nw;
  k.weights = std::move(w);
  return k;
}

}  // namespace detail

inline BlurKernel make_identity_kernel() { return BlurKernel{}; }

inline BlurKernel make_average_kernel(int n) {
  if (n < 1 || n % 2 == 0) throw ValidationError("average kernel size must be odd and >= 1, got " + std::to_string(n));
  const std::size_t sz = static_cast<std::size_t>(n);
  return BlurKernel{sz, sz, std::vector<double>(sz * sz, 1.0 / static_cast<double>(sz * sz)), KernelKind::average,
                    static_cast<double>(n), 0.0};
}

/// Disk kernel with pixel weights proportional to the area of each unit pixel square inside
/// the disk, estimated on a sub x sub grid of sample points per pixel.
inline BlurKernel make_disk_kernel(double radius, int sub = kCoverageSubsamples) {
  if (!(radius > 0.0)) throw ValidationError("disk radius must be positive");
  const int half = static_cast<int>(std::ceil(radius));
  const std::size_t n = static_cast<std::size_t>(2 * half + 1);
  std::vector<double> w(n * n, 0.0);
  const double r2 = radius * radius;
  for (int a = -half; a <= half; ++a) {
    for (int b = -half; b <= half; ++b) {
      int inside = 0;
      for (int u = 0; u < sub; ++u) {
        const double y = a - 0.5 + (u + 0.5) / sub;
        for (int v = 0; v < sub; ++v) {
          const double x = b - 0.5 + (v + 0.5) / sub;
          if (x * x + y * y <= r2) ++inside;
        }
      }
      w[static_cast<std::size_t>(a + half) * n + static_cast<std::size_t>(b + half)] =
          static_cast<double>(inside) / (static_cast<double>(sub) * sub);
    }
  }
  return detail::normalized(n, n, std::move(w), KernelKind::disk, radius, 0.0);
}

/// Linear motion kernel: a centered segment of the given length, angle measured
/// counter-clockwise from the column axis (rows grow downward). Pixel weights are
/// proportional to the segment length inside each pixel, estimated from sub samples per
/// unit length taken at sub-segment midpoints.
inline BlurKernel make_motion_kernel(double length, double angle, int sub = kCoverageSubsamples) {
  if (!(length >= 1.0)) throw ValidationError("motion length must be >= 1");
  const double c = std::cos(angle), s = std::sin(angle);
  const double half_len = 0.5 * length;
  const int hw = static_cast<int>(std::floor(std::abs(half_len * c) + 0.5));
  const int hh = static_cast<int>(std::floor(std::abs(half_len * s) + 0.5));
  const std::size_t kh = static_cast<std::size_t>(2 * hh + 1), kw = static_cast<std::size_t>(2 * hw + 1);
  std::vector<double> w(kh * kw, 0.0);
  const long samples = std::max<long>(sub, static_cast<long>(std::ceil(sub * length)));
  for (long k = 0; k < samples; ++k) {
    const double t = -half_len + (static_cast<double>(k) + 0.5) * length / static_cast<double>(samples);
    const double x = t * c;   // column offset
    const double y = -t * s;  // row offset (up is negative row)
    const int b = static_cast<int>(std::floor(x + 0.5));
    const int a = static_cast<int>(std::floor(y + 0.5));
    if (a < -hh || a > hh || b < -hw || b > hw) continue;
    w[static_cast<std::size_t>(a + hh) * kw + static_cast<std::size_t>(b + hw)] += 1.0;
  }
  return detail::trim_symmetric(detail::normalized(kh, kw, std::move(w), KernelKind::motion, length, angle));
}

inline BlurKernel make_custom_kernel(std::size_t kh, std::size_t kw, std::vector<double> weights) {
  if (kh % 2 == 0 || kw % 2 == 0) throw ValidationError("custom kernel dimensions must be odd");
  if (weights.size() != kh * kw) throw ValidationError("custom kernel weight count mismatch");
  for (double v : weights)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("custom kernel weights must be nonnegative");
  return detail::normalized(kh, kw, std::move(weights), KernelKind::custom, 0.0, 0.0);
}

inline std::string BlurKernel::describe() const {
  switch (kind) {
    case KernelKind::identity: return "identity";
    case KernelKind::average: return "average(" + std::to_string(static_cast<int>(param1)) + ")";
    case KernelKind::disk: return "disk(" + std::to_string(param1) + ")";
    case KernelKind::motion: return "motion(" + std::to_string(param1) + "," + std::to_string(param2) + ")";
    case KernelKind::custom: return "custom(" + std::to_string(kh) + "x" + std::to_string(kw) + ")";
  }
  return "?";
}

namespace detail {

inline void require_fits(const BlurKernel& k, const ImageGrid& u, const char* where) {
  if (k.kh > u.rows() || k.kw > u.cols()) {
    throw ValidationError(std::string(where) + ": kernel " + std::to_string(k.kh) + "x" + std::to_string(k.kw) +
                          " larger than image " + u.shape_str());
  }
}

inline std::size_t clamp_index(long v, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1));
}

}  // namespace detail

/// (K u)(i,j) = sum_{a,b} k(a,b) u(clamp(i+a), clamp(j+b)).
inline ImageGrid apply_blur(const BlurKernel& k, const ImageGrid& u) {
  detail::require_fits(k, u, "apply_blur");
  const std::size_t R = u.rows(), C = u.cols();
  const int ha = k.half_h(), hb = k.half_w();
  ImageGrid out(R, C, 0.0, u.h());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(R); ++i) {
    double* o = out.row(static_cast<std::size_t>(i));
    for (int a = -ha; a <= ha; ++a) {
      const double* src = u.row(detail::clamp_index(i + a, R));
      for (int b = -hb; b <= hb; ++b) {
        const double wgt = k.at(a, b);
        if (wgt == 0.0) continue;
        for (std::size_t j = 0; j < C; ++j) o[j] += wgt * src[detail::clamp_index(static_cast<long>(j) + b, C)];
      }
    }
  }
  return out;
}

/// Exact transpose of apply_blur including its replicate padding: every contribution
/// k(a,b) u(clamp(i+a), clamp(j+b)) -> out(i,j) is reversed into a scatter.
inline ImageGrid apply_adjoint(const BlurKernel& k, const ImageGrid& v) {
  detail::require_fits(k, v, "apply_adjoint");
  const std::size_t R = v.rows(), C = v.cols();
  const int ha = k.half_h(), hb = k.half_w();
  ImageGrid out(R, C, 0.0, v.h());
  // Gather per target row keeps threads write-disjoint: row r receives source rows i with
  // clamp(i+a) = r, which is a single row in the interior and a run at either edge.
#pragma omp parallel for schedule(static)
  for (long r = 0; r < static_cast<long>(R); ++r) {
    double* o = out.row(static_cast<std::size_t>(r));
    const long last = static_cast<long>(R) - 1;
    for (int a = -ha; a <= ha; ++a) {
      long lo = r - a, hi = r - a;
      if (r == 0) {
        lo = 0;
        hi = -a;
      } else if (r == last) {
        lo = last - a;
        hi = last;
      }
      lo = std::max(lo, 0L);
      hi = std::min(hi, last);
      for (long i = lo; i <= hi; ++i) {
        const double* src = v.row(static_cast<std::size_t>(i));
        for (int b = -hb; b <= hb; ++b) {
          const double wgt = k.at(a, b);
          if (wgt == 0.0) continue;
          for (std::size_t j = 0; j < C; ++j) o[detail::clamp_index(static_cast<long>(j) + b, C)] += wgt * src[j];
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noise

/// Counter-based Gaussian source: splitmix64 of (seed, counter) feeding Box-Muller.
/// Sample k depends only on (seed, k).
class CounterGaussian {
 public:
  static constexpr const char* kName = "splitmix64-counter/box-muller";

  explicit CounterGaussian(std::uint64_t seed) : seed_(seed) {}

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in (0,1) from 53 random bits.
  double uniform(std::uint64_t counter) const noexcept {
    const std::uint64_t bits = mix(seed_ ^ mix(counter));
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal sample number k.
  double normal(std::uint64_t k) const noexcept {
    const std::uint64_t pair = k >> 1;
    const double u1 = uniform(2 * pair);
    const double u2 = uniform(2 * pair + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    return (k & 1) ? r * std::sin(th) : r * std::cos(th);
  }

 private:
  std::uint64_t seed_;
};

struct DegradationSpec {
  BlurKernel kernel;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Reads a raw little-endian float64 noise field of rows*cols samples.
inline std::vector<double> load_noise_file(const std::string& path, std::size_t rows, std::size_t cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open noise file");
  std::vector<double> out(rows * cols);
  for (auto& v : out) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) {
      throw IoError(path + ": noise file shorter than " + std::to_string(rows * cols) + " samples");
    }
    std::uint64_t bits = 0;
    for (int k = 7; k >= 0; --k) bits = (bits << 8) | b[k];
    std::memcpy(&v, &bits, sizeof v);
  }
  return out;
}

inline void save_noise_file(const std::string& path, std::span<const double> noise) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open noise file for writing");
  for (double v : noise) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof v);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
    out.write(reinterpret_cast<const char*>(b), 8);
  }
}

/// f = K u + n. The noise is sigma * N(0,1) from the counter generator unless an explicit
/// unit-free noise field (already scaled) is supplied.
inline ImageGrid degrade(const ImageGrid& u, const DegradationSpec& spec,
                         const std::vector<double>* noise = nullptr) {
  if (!(spec.sigma >= 0.0)) throw ValidationError("degrade: sigma must be >= 0");
  ImageGrid f = apply_blur(spec.kernel, u);
  auto fv = f.values();
  if (noise) {
    if (noise->size() != fv.size()) throw ValidationError("degrade: noise field size mismatch");
    for (std::size_t k = 0; k < fv.size(); ++k) fv[k] += (*noise)[k];
  } else if (spec.sigma > 0.0) {
    const CounterGaussian gen(spec.seed);
    for (std::size_t k = 0; k < fv.size(); ++k) fv[k] += spec.sigma * gen.normal(k);
  }
  return f;
}

}  // namespace fbfrac
