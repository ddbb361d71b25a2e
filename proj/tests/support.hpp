#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fbfrac/fbfrac.hpp"

namespace fbtest {

inline fbfrac::ImageGrid random_image(std::size_t r, std::size_t c, std::uint64_t seed, double lo = 0.0,
                                      double hi = 255.0, double h = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  fbfrac::ImageGrid g(r, c, 0.0, h);
  for (double& v : g.values()) v = d(rng);
  return g;
}

inline fbfrac::ImageGrid smooth_image(std::size_t r, std::size_t c, double h = 1.0) {
  fbfrac::ImageGrid g(r, c, 0.0, h);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      g(i, j) = 3.0 * static_cast<double>(i) + 2.0 * static_cast<double>(j) +
                0.8 * std::sin(0.4 * static_cast<double>(i)) * std::cos(0.3 * static_cast<double>(j));
  return g;
}

inline fbfrac::ImageGrid gaussian_bump(std::size_t r, std::size_t c, double amp, double width) {
  fbfrac::ImageGrid g(r, c, 0.0);
  const double ci = (static_cast<double>(r) - 1.0) / 2.0, cj = (static_cast<double>(c) - 1.0) / 2.0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double di = static_cast<double>(i) - ci, dj = static_cast<double>(j) - cj;
      g(i, j) = amp * std::exp(-(di * di + dj * dj) / (2.0 * width * width));
    }
  return g;
}

inline double sum(const fbfrac::ImageGrid& g) {
  double s = 0.0;
  for (double v : g.values()) s += v;
  return s;
}

inline double max_abs_diff(const fbfrac::ImageGrid& a, const fbfrac::ImageGrid& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
  return m;
}

/// Fresh scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& tag) {
  auto d = std::filesystem::temp_directory_path() / ("fbfrac_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d.string();
}

}  // namespace fbtest
