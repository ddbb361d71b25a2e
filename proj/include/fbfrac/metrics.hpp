#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "fbfrac/error.hpp"
#include "fbfrac/grid.hpp"

namespace fbfrac {

struct MetricsReport {
  double psnr = 0.0;  // dB, +inf for identical images
  double ssim = 0.0;
};

inline constexpr double kPeak = 255.0;

/// PSNR(u,f) = 10 log10(sum 255^2 / sum (u-f)^2). Identical images give +infinity.
inline double psnr(const ImageGrid& u, const ImageGrid& f) {
  u.require_same_shape(f, "psnr");
  double sse = 0.0;
  auto uv = u.values();
  auto fv = f.values();
  for (std::size_t k = 0; k < uv.size(); ++k) {
    const double d = uv[k] - fv[k];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kPeak * kPeak * static_cast<double>(uv.size()) / sse);
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = kPeak;
};

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
inline std::vector<double> gaussian_taps(int window, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(window));
  const int half = window / 2;
  double s = 0.0;
  for (int k = 0; k < window; ++k) {
    const double x = k - half;
    g[static_cast<std::size_t>(k)] = std::exp(-x * x / (2.0 * sigma * sigma));
    s += g[static_cast<std::size_t>(k)];
  }
  for (double& v : g) v /= s;
  return g;
}

namespace detail {

// Separable Gaussian-weighted local mean with replicate padding.
inline std::vector<double> local_mean(const std::vector<double>& x, std::size_t R, std::size_t C,
                                      const std::vector<double>& g) {
  const long half = static_cast<long>(g.size() / 2);
  auto clampi = [](long v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1));
  };
  std::vector<double> tmp(R * C, 0.0), out(R * C, 0.0);
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) {
      double acc = 0.0;
      for (long b = -half; b <= half; ++b)
        acc += g[static_cast<std::size_t>(b + half)] * x[i * C + clampi(static_cast<long>(j) + b, C)];
      tmp[i * C + j] = acc;
    }
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) {
      double acc = 0.0;
      for (long a = -half; a <= half; ++a)
        acc += g[static_cast<std::size_t>(a + half)] * tmp[clampi(static_cast<long>(i) + a, R) * C + j];
      out[i * C + j] = acc;
    }
  return out;
}

}  // namespace detail

/// Mean SSIM over all pixel positions with an 11x11 Gaussian window (sigma 1.5),
/// c1 = (0.01 L)^2, c2 = (0.03 L)^2, L = 255 and replicate padding.
inline double ssim(const ImageGrid& u, const ImageGrid& f, const SsimParams& prm = {}) {
  u.require_same_shape(f, "ssim");
  const std::size_t R = u.rows(), C = u.cols();
  if (R < static_cast<std::size_t>(prm.window) || C < static_cast<std::size_t>(prm.window)) {
    throw ValidationError("ssim: image " + u.shape_str() + " smaller than the " + std::to_string(prm.window) +
                          "x" + std::to_string(prm.window) + " window");
  }
  const auto g = gaussian_taps(prm.window, prm.sigma);
  const std::size_t N = R * C;
  std::vector<double> a(u.values().begin(), u.values().end()), b(f.values().begin(), f.values().end());
  std::vector<double> aa(N), bb(N), ab(N);
  for (std::size_t k = 0; k < N; ++k) {
    aa[k] = a[k] * a[k];
    bb[k] = b[k] * b[k];
    ab[k] = a[k] * b[k];
  }
  const auto mu_a = detail::local_mean(a, R, C, g);
  const auto mu_b = detail::local_mean(b, R, C, g);
  const auto e_aa = detail::local_mean(aa, R, C, g);
  const auto e_bb = detail::local_mean(bb, R, C, g);
  const auto e_ab = detail::local_mean(ab, R, C, g);
  const double c1 = (prm.k1 * prm.peak) * (prm.k1 * prm.peak);
  const double c2 = (prm.k2 * prm.peak) * (prm.k2 * prm.peak);
  double total = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    const double va = e_aa[k] - mu_a[k] * mu_a[k];
    const double vb = e_bb[k] - mu_b[k] * mu_b[k];
    const double cov = e_ab[k] - mu_a[k] * mu_b[k];
    const double num = (2.0 * mu_a[k] * mu_b[k] + c1) * (2.0 * cov + c2);
    const double den = (mu_a[k] * mu_a[k] + mu_b[k] * mu_b[k] + c1) * (va + vb + c2);
    total += num / den;
  }
  return total / static_cast<double>(N);
}

inline MetricsReport evaluate(const ImageGrid& u, const ImageGrid& f) { return {psnr(u, f), ssim(u, f)}; }

}  // namespace fbfrac
