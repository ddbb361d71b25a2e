#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "fbfrac/error.hpp"

namespace fbfrac {

using Vec2 = std::array<double, 2>;

/// Radial profile of the potential: Phi(s) = 1/2 ln(1+s^2) + (delta/gamma) s^gamma, the
/// antiderivative of the flux magnitude with Phi(0) = 0.
inline double phi_profile(double s, double gamma, double delta) {
  return 0.5 * std::log1p(s * s) + (delta / gamma) * std::pow(s, gamma);
}

inline double phi_profile_d1(double s, double gamma, double delta) {
  if (s == 0.0) return 0.0;
  return s / (1.0 + s * s) + delta * std::pow(s, gamma - 1.0);
}

inline double phi_profile_d2(double s, double gamma, double delta) {
  const double s2 = s * s;
  const double pm = (1.0 - s2) / ((1.0 + s2) * (1.0 + s2));
  if (gamma == 2.0) return pm + delta;
  if (s == 0.0) return HUGE_VAL;
  return pm + delta * (gamma - 1.0) * std::pow(s, gamma - 2.0);
}

/// q_gamma(theta) = theta/(1+|theta|^2) + delta |theta|^(gamma-2) theta; q(0) = 0.
inline Vec2 q_gamma(const Vec2& theta, double gamma, double delta) {
  const double n = std::hypot(theta[0], theta[1]);
  if (n == 0.0) return {0.0, 0.0};
  const double c = 1.0 / (1.0 + n * n) + delta * std::pow(n, gamma - 2.0);
  return {c * theta[0], c * theta[1]};
}

/// Threshold above which Phi is convex:
/// delta0 = (gamma-1)^-1 kappa^((2-gamma)/2) (kappa-1)/(kappa+1)^2,
/// kappa = (3 + sqrt(gamma^2 - 2 gamma + 9)) / gamma.
inline double delta0(double gamma) {
  if (!(gamma > 1.0 && gamma <= 2.0)) throw ValidationError("delta0: gamma must lie in (1,2]");
  const double kappa = (3.0 + std::sqrt(gamma * gamma - 2.0 * gamma + 9.0)) / gamma;
  return std::pow(kappa, 0.5 * (2.0 - gamma)) * (kappa - 1.0) / ((gamma - 1.0) * (kappa + 1.0) * (kappa + 1.0));
}

/// Witness constants for the growth bounds:
/// max{c s^gamma - 1, 0} <= Phi**(s) <= C s^gamma + 1 with c = delta/gamma, C = delta/gamma + 3/2.
inline double growth_lower_constant(double gamma, double delta) { return delta / gamma; }
inline double growth_upper_constant(double gamma, double delta) { return delta / gamma + 1.5; }
/// |q_gamma(theta)| <= (1/2 + delta) |theta|^(gamma-1) for |theta| >= 1.
inline double flux_growth_constant(double delta) { return 0.5 + delta; }

/// Lower convex envelope of the sampled graph (xs strictly increasing), evaluated back on
/// xs. Monotone-chain hull; returns the hull vertex indices through `vertices` if given.
inline std::vector<double> lower_convex_envelope(const std::vector<double>& xs, const std::vector<double>& ys,
                                                 std::vector<std::size_t>* vertices = nullptr) {
  const std::size_t n = xs.size();
  if (n != ys.size() || n < 2) throw ValidationError("lower_convex_envelope: need >= 2 matching samples");
  std::vector<std::size_t> hull;
  hull.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2], b = hull.back();
      // Pop b when it lies on or above the chord a -> k.
      const double cross = (xs[b] - xs[a]) * (ys[k] - ys[a]) - (ys[b] - ys[a]) * (xs[k] - xs[a]);
      if (cross <= 0.0) hull.pop_back();
      else break;
    }
    hull.push_back(k);
  }
  std::vector<double> env(n);
  for (std::size_t v = 0; v + 1 < hull.size(); ++v) {
    const std::size_t a = hull[v], b = hull[v + 1];
    const double slope = (ys[b] - ys[a]) / (xs[b] - xs[a]);
    for (std::size_t k = a; k < b; ++k) env[k] = ys[a] + slope * (xs[k] - xs[a]);
  }
  env[n - 1] = ys[n - 1];
  if (vertices) *vertices = std::move(hull);
  return env;
}

/// Maximal interval on which Phi** < Phi; Phi** is affine there with the given slope.
struct Bridge {
  double left;   // tangent point
  double right;  // tangent point
  double slope;
  std::size_t sample_left;   // hull vertex sample indices that detected it
  std::size_t sample_right;
};

/// Sampled radial profile of phi_gamma and its convexification.
class PotentialProfile {
 public:
  double gamma() const noexcept { return gamma_; }
  double delta() const noexcept { return delta_; }
  double smax() const noexcept { return smax_; }
  std::size_t n_samples() const noexcept { return s_.size(); }
  const std::vector<double>& s() const noexcept { return s_; }
  const std::vector<double>& phi() const noexcept { return phi_; }
  const std::vector<double>& envelope() const noexcept { return env_; }
  const std::vector<double>& envelope_slope() const noexcept { return denv_; }
  const std::vector<Bridge>& bridges() const noexcept { return bridges_; }

  /// Phi** at radius r (exact off the bridges, affine on them).
  double envelope_at(double r) const {
    require_in_range(r);
    if (const Bridge* b = bridge_at(r)) return phi_profile(b->left, gamma_, delta_) + b->slope * (r - b->left);
    return phi_profile(r, gamma_, delta_);
  }

  /// Magnitude of rho_gamma at radius r: Phi**'(r).
  double slope_at(double r) const {
    require_in_range(r);
    if (const Bridge* b = bridge_at(r)) return b->slope;
    return phi_profile_d1(r, gamma_, delta_);
  }

  const Bridge* bridge_at(double r) const noexcept {
    for (const auto& b : bridges_)
      if (r > b.left && r < b.right) return &b;
    return nullptr;
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open profile CSV for writing");
    out << "s,phi,phi_star_star,rho\n" << std::setprecision(17);
    for (std::size_t k = 0; k < s_.size(); ++k) out << s_[k] << ',' << phi_[k] << ',' << env_[k] << ',' << denv_[k] << '\n';
  }

 private:
  friend PotentialProfile convexify(double, double, double, std::size_t);

  void require_in_range(double r) const {
    if (!(r >= 0.0) || r > smax_) {
      throw ValidationError("potential profile: |theta| = " + std::to_string(r) + " outside [0, smax=" +
                            std::to_string(smax_) + "]");
    }
  }

  double gamma_ = 2.0, delta_ = 0.0, smax_ = 0.0;
  std::vector<double> s_, phi_, env_, denv_;
  std::vector<Bridge> bridges_;
};

namespace detail {

// Newton refinement of the common tangent (a, b): Phi'(a) = Phi'(b) and
// Phi(b) - Phi(a) = Phi'(a) (b - a). Returns false if it does not settle.
inline bool refine_double_tangent(double gamma, double delta, double& a, double& b) {
  double x = a, y = b;
  for (int it = 0; it < 100; ++it) {
    const double da = phi_profile_d1(x, gamma, delta), db = phi_profile_d1(y, gamma, delta);
    const double f1 = da - db;
    const double f2 = phi_profile(y, gamma, delta) - phi_profile(x, gamma, delta) - da * (y - x);
    const double ha = phi_profile_d2(x, gamma, delta), hb = phi_profile_d2(y, gamma, delta);
    // J = [[ha, -hb], [-ha (y-x), f1]]
    const double j11 = ha, j12 = -hb, j21 = -ha * (y - x), j22 = f1;
    const double det = j11 * j22 - j12 * j21;
    if (!std::isfinite(det) || det == 0.0) return false;
    double sx = (f1 * j22 - j12 * f2) / det;
    double sy = (j11 * f2 - j21 * f1) / det;
    // Damp steps that would cross or leave the half line.
    double lam = 1.0;
    while (lam > 1e-6 && (x - lam * sx <= 0.0 || y - lam * sy <= x - lam * sx)) lam *= 0.5;
    x -= lam * sx;
    y -= lam * sy;
    if (std::abs(sx) + std::abs(sy) < 1e-14 * (1.0 + y)) break;
  }
  const double da = phi_profile_d1(x, gamma, delta), db = phi_profile_d1(y, gamma, delta);
  const double f2 = phi_profile(y, gamma, delta) - phi_profile(x, gamma, delta) - da * (y - x);
  if (!(x > 0.0 && y > x) || std::abs(da - db) > 1e-10 || std::abs(f2) > 1e-11) return false;
  a = x;
  b = y;
  return true;
}

}  // namespace detail

/// Gap Phi - chord above which a skipped hull stretch counts as a bridge.
inline constexpr double kBridgeGapTolerance = 1e-12;

/// Convexifies the radial profile on a uniform grid of n samples over [0, smax]. Bridges are
/// located by the lower hull and their end points refined to the exact double tangent.
inline PotentialProfile convexify(double gamma, double delta, double smax = 50.0, std::size_t n = 4096) {
  if (!(gamma > 1.0 && gamma <= 2.0)) throw ValidationError("convexify: gamma must lie in (1,2]");
  if (!(delta >= 0.0)) throw ValidationError("convexify: delta must be >= 0");
  if (n < 256) throw ValidationError("convexify: need at least 256 samples");
  if (!(smax > 0.0) || !std::isfinite(smax)) throw ValidationError("convexify: degenerate sampling interval");
  const double ds = smax / static_cast<double>(n - 1);
  for (std::size_t k = (n - 1) / 2; k < n; ++k) {
    const double sk = static_cast<double>(k) * ds;
    if (phi_profile_d2(sk, gamma, delta) < 0.0) {
      throw ValidationError("convexify: smax too small, profile is not convex beyond smax/2 (s=" +
                            std::to_string(sk) + ")");
    }
  }

  PotentialProfile prof;
  prof.gamma_ = gamma;
  prof.delta_ = delta;
  prof.smax_ = smax;
  prof.s_.resize(n);
  prof.phi_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    prof.s_[k] = static_cast<double>(k) * ds;
    prof.phi_[k] = phi_profile(prof.s_[k], gamma, delta);
  }

  std::vector<std::size_t> hull;
  const std::vector<double> hull_env = lower_convex_envelope(prof.s_, prof.phi_, &hull);

  for (std::size_t v = 0; v + 1 < hull.size(); ++v) {
    const std::size_t a = hull[v], b = hull[v + 1];
    if (b - a < 2) continue;
    double gap = 0.0;
    for (std::size_t k = a + 1; k < b; ++k) gap = std::max(gap, prof.phi_[k] - hull_env[k]);
    if (gap <= kBridgeGapTolerance * (1.0 + std::abs(prof.phi_[b]))) continue;
    double left = prof.s_[a], right = prof.s_[b];
    double slope = (prof.phi_[b] - prof.phi_[a]) / (right - left);
    if (detail::refine_double_tangent(gamma, delta, left, right)) {
      slope = phi_profile_d1(left, gamma, delta);
    } else {
      left = prof.s_[a];
      right = prof.s_[b];
    }
    prof.bridges_.push_back({left, right, slope, a, b});
  }

  prof.env_.resize(n);
  prof.denv_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = prof.s_[k];
    if (const Bridge* b = prof.bridge_at(r)) {
      prof.env_[k] = std::min(prof.phi_[k], phi_profile(b->left, gamma, delta) + b->slope * (r - b->left));
      prof.denv_[k] = b->slope;
    } else {
      prof.env_[k] = prof.phi_[k];
      prof.denv_[k] = phi_profile_d1(r, gamma, delta);
    }
  }
  return prof;
}

/// rho_gamma(theta) = grad phi**(theta) = Phi**'(|theta|) theta/|theta|; 0 at theta = 0.
inline Vec2 rho_gamma(const PotentialProfile& prof, const Vec2& theta) {
  const double n = std::hypot(theta[0], theta[1]);
  if (n == 0.0) return {0.0, 0.0};
  const double m = prof.slope_at(n);
  return {m * theta[0] / n, m * theta[1] / n};
}

}  // namespace fbfrac
