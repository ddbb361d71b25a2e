#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "fbfrac/blur.hpp"
#include "fbfrac/error.hpp"
#include "fbfrac/grid.hpp"
#include "fbfrac/localops.hpp"
#include "fbfrac/nonlocal.hpp"
#include "fbfrac/potential.hpp"
#include "fbfrac/solver_config.hpp"

namespace fbfrac {

struct InnerSettings {
  double initial_step = 1.0;  // first trial step of the backtracking search
  double min_step = 1e-10;
  double max_step = 1e6;
  std::size_t memory = 10;  // non-monotone acceptance window
  long max_iterations = 20000;
  double tol = 1e-8;  // on the max-norm of the gradient divided by h^2
};

/// Rothe slicing of [0,T] into m implicit steps of length T/m. p = 1 is unsupported here.
struct RotheConfig {
  long m = 10;
  double T = 0.1;
  InnerSettings inner;
  SolverConfig physics;
  double smax = 50.0;          // radial range of the convexified profile
  std::size_t max_pixels = 32 * 32;
  bool allow_large = false;

  double tau() const { return T / static_cast<double>(m); }

  void validate() const {
    if (m < 1) throw ValidationError("rothe: m must be >= 1");
    if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("rothe: T must be > 0");
    if (!(inner.tol > 0.0)) throw ValidationError("rothe: inner tolerance must be > 0");
    if (!(inner.initial_step > 0.0)) throw ValidationError("rothe: inner step must be > 0");
    if (inner.max_iterations < 1) throw ValidationError("rothe: inner iteration budget must be >= 1");
    if (!(physics.p > 1.0)) throw ValidationError("rothe: p must be > 1 (p = 1 is outside the Rothe solver)");
    physics.validate();
  }
};

struct InnerResult {
  ImageGrid x;
  long iterations = 0;
  double grad_norm = 0.0;  // max-norm of gradient / h^2 at x
  double objective = 0.0;
  long clamped_faces = 0;  // u-step only: faces with |grad v| beyond smax
};

namespace detail {

// Gradient descent with a halving backtracking search. `value(x)` returns the objective;
// `gradient(x)` returns the gradient divided by h^2. The first trial step of each iteration is
// the Barzilai-Borwein quotient of the last move (alternating the two quotients), clipped to
// [min_step, max_step]; acceptance is Armijo against the largest of the last `memory` objective
// values. When the objective change is lost in rounding, a trial point is accepted once the
// directional derivative there is still non-positive, which for a convex objective keeps it on
// the descending side of the line minimum.
template <class Value, class Gradient>
InnerResult gradient_descent(ImageGrid x, Value value, Gradient gradient, const InnerSettings& s,
                             const char* what) {
  const double h2 = x.h() * x.h();
  InnerResult res;
  double fx = value(x);
  ImageGrid g = gradient(x);
  std::vector<double> recent{fx};
  double alpha = s.initial_step;
  for (long it = 0;; ++it) {
    const double gn = g.max_abs();
    if (gn < s.tol) {
      res.iterations = it;
      res.grad_norm = gn;
      res.objective = fx;
      res.x = std::move(x);
      return res;
    }
    if (it >= s.max_iterations) {
      throw NonConvergenceError(gn, std::string(what) + ": inner budget of " + std::to_string(s.max_iterations) +
                                        " iterations exhausted, gradient max-norm " + std::to_string(gn));
    }
    double gg = 0.0;
    for (double v : g.values()) gg += v * v;
    gg *= h2;
    const double fref = *std::max_element(recent.begin(), recent.end());
    alpha = std::clamp(alpha, s.min_step, s.max_step);
    for (;;) {
      ImageGrid xt = x;
      auto xv = xt.values();
      auto gv = g.values();
      for (std::size_t k = 0; k < xv.size(); ++k) xv[k] -= alpha * gv[k];
      const double ft = value(xt);
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(fx) + std::abs(ft));
      bool accept = ft <= fref - 1e-4 * alpha * gg;
      ImageGrid gt;
      if (!accept && std::abs(ft - fx) <= noise) {
        gt = gradient(xt);
        double slope = 0.0;
        auto gtv = gt.values();
        for (std::size_t k = 0; k < gtv.size(); ++k) slope += gtv[k] * gv[k];
        accept = slope >= 0.0;
      }
      if (accept) {
        if (!gt.size()) gt = gradient(xt);
        // s = x_t - x = -alpha g, y = g_t - g
        double sy = 0.0, yy = 0.0;
        auto gtv = gt.values();
        for (std::size_t k = 0; k < gtv.size(); ++k) {
          const double y = gtv[k] - gv[k];
          sy += -alpha * gv[k] * y;
          yy += y * y;
        }
        const double ss = alpha * alpha * gg / h2;
        x = std::move(xt);
        fx = ft;
        g = std::move(gt);
        recent.push_back(fx);
        if (recent.size() > s.memory) recent.erase(recent.begin());
        if (sy > 0.0) {
          alpha = it % 2 == 0 ? ss / sy : sy / yy;
        } else {
          alpha = s.max_step;
        }
        break;
      }
      alpha *= 0.5;
      if (alpha < 1e-30) {
        throw NonConvergenceError(gn, std::string(what) + ": line search stalled at gradient max-norm " +
                                          std::to_string(gn));
      }
    }
  }
}

}  // namespace detail

/// K'(f - K u).
inline ImageGrid data_forcing(const ImageGrid& u, const ImageGrid& f, const BlurKernel& kernel) {
  ImageGrid r = f;
  r -= apply_blur(kernel, u);
  return apply_adjoint(kernel, r);
}

/// w-slice objective F(z) = h^2 [ 1/2 sum (z - w_prev)^2 - tau lambda3 sum g z ] + tau/(2p) J(z),
/// J(z) = h^2 sum_x sum_y W |z(y)-z(x)|^p, g = K'(f - K u_prev).
struct WStepObjective {
  const NonlocalPlan& plan;
  ImageGrid w_prev;
  ImageGrid g;
  double tau, lambda3;

  double seminorm(const ImageGrid& z) const { return frac_seminorm_p(plan, z) / (z.h() * z.h()); }

  double value(const ImageGrid& z) const {
    double q = 0.0, lin = 0.0;
    auto zv = z.values();
    auto wv = w_prev.values();
    auto gv = g.values();
    for (std::size_t k = 0; k < zv.size(); ++k) {
      const double d = zv[k] - wv[k];
      q += 0.5 * d * d;
      lin += gv[k] * zv[k];
    }
    const double h2 = z.h() * z.h();
    return h2 * (q - tau * lambda3 * lin) + tau / (2.0 * plan.p()) * seminorm(z);
  }

  ImageGrid gradient(const ImageGrid& z) const {
    ImageGrid out = apply_frac_p_laplacian(plan, z);
    auto o = out.values();
    auto zv = z.values();
    auto wv = w_prev.values();
    auto gv = g.values();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = (zv[k] - wv[k]) - tau * o[k] - tau * lambda3 * gv[k];
    return out;
  }
};

inline WStepObjective make_w_objective(const ImageGrid& w_prev, const ImageGrid& u_prev, const ImageGrid& f,
                                       const RotheConfig& cfg, const NonlocalPlan& plan, const BlurKernel& kernel) {
  return {plan, w_prev, data_forcing(u_prev, f, kernel), cfg.tau(), cfg.physics.lambda3};
}

inline InnerResult rothe_w_step_full(const ImageGrid& w_prev, const ImageGrid& u_prev, const ImageGrid& f,
                                     const RotheConfig& cfg, const NonlocalPlan& plan, const BlurKernel& kernel) {
  if (!(cfg.physics.p > 1.0)) throw ValidationError("rothe_w_step: p must be > 1");
  if (plan.p() != cfg.physics.p) throw ValidationError("rothe_w_step: plan exponent differs from config p");
  w_prev.require_same_shape(f, "rothe_w_step");
  u_prev.require_same_shape(f, "rothe_w_step");
  const WStepObjective obj = make_w_objective(w_prev, u_prev, f, cfg, plan, kernel);
  return detail::gradient_descent(
      w_prev, [&](const ImageGrid& z) { return obj.value(z); }, [&](const ImageGrid& z) { return obj.gradient(z); },
      cfg.inner, "rothe_w_step");
}

inline ImageGrid rothe_w_step(const ImageGrid& w_prev, const ImageGrid& u_prev, const ImageGrid& f,
                              const RotheConfig& cfg, const NonlocalPlan& plan, const BlurKernel& kernel) {
  return rothe_w_step_full(w_prev, u_prev, f, cfg, plan, kernel).x;
}

/// u-slice objective E(v) = h^2 sum [ tau Phi**(|grad+ v|) + 1/2 (v - u_prev)^2 + tau c v ],
/// c = lambda1 u_prev - lambda2 w. Beyond smax, Phi** continues with the slope at smax.
struct UStepObjective {
  const PotentialProfile& profile;
  ImageGrid u_prev;
  ImageGrid c;
  double tau;

  double envelope(double r) const {
    const double sm = profile.smax();
    if (r <= sm) return profile.envelope_at(r);
    return profile.envelope_at(sm) + profile.slope_at(sm) * (r - sm);
  }
  double slope(double r) const { return profile.slope_at(std::min(r, profile.smax())); }

  double value(const ImageGrid& v) const {
    const std::size_t R = v.rows(), C = v.cols();
    double acc = 0.0;
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) {
        const double gx = detail::fwd_x(v, i, j), gy = detail::fwd_y(v, i, j);
        const double d = v(i, j) - u_prev(i, j);
        acc += tau * envelope(std::hypot(gx, gy)) + 0.5 * d * d + tau * c(i, j) * v(i, j);
      }
    return v.h() * v.h() * acc;
  }

  FluxField rho_field(const ImageGrid& v, long* clamped = nullptr) const {
    const std::size_t R = v.rows(), C = v.cols();
    FluxField fl{ImageGrid(R, C, 0.0, v.h()), ImageGrid(R, C, 0.0, v.h())};
    long n = 0;
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) {
        const double gx = detail::fwd_x(v, i, j), gy = detail::fwd_y(v, i, j);
        const double r = std::hypot(gx, gy);
        if (r == 0.0) continue;
        if (r > profile.smax()) ++n;
        const double m = slope(r) / r;
        fl.qx(i, j) = m * gx;
        fl.qy(i, j) = m * gy;
      }
    if (clamped) *clamped = n;
    return fl;
  }

  ImageGrid gradient(const ImageGrid& v) const {
    ImageGrid out = divergence(rho_field(v));
    auto o = out.values();
    auto vv = v.values();
    auto uv = u_prev.values();
    auto cv = c.values();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = (vv[k] - uv[k]) - tau * o[k] + tau * cv[k];
    return out;
  }
};

inline UStepObjective make_u_objective(const ImageGrid& u_prev, const ImageGrid& w_curr, const RotheConfig& cfg,
                                       const PotentialProfile& profile) {
  ImageGrid c = u_prev;
  c *= cfg.physics.lambda1;
  ImageGrid lw = w_curr;
  lw *= cfg.physics.lambda2;
  c -= lw;
  return {profile, u_prev, std::move(c), cfg.tau()};
}

inline InnerResult rothe_u_step_full(const ImageGrid& u_prev, const ImageGrid& w_curr, const RotheConfig& cfg,
                                     const PotentialProfile& profile) {
  u_prev.require_same_shape(w_curr, "rothe_u_step");
  const UStepObjective obj = make_u_objective(u_prev, w_curr, cfg, profile);
  InnerResult res = detail::gradient_descent(
      u_prev, [&](const ImageGrid& v) { return obj.value(v); }, [&](const ImageGrid& v) { return obj.gradient(v); },
      cfg.inner, "rothe_u_step");
  obj.rho_field(res.x, &res.clamped_faces);
  if (res.clamped_faces > 0) {
    std::cerr << "warning: rothe_u_step: " << res.clamped_faces << " faces have |grad u| > smax = "
              << profile.smax() << "; the profile slope is clamped there\n";
  }
  return res;
}

inline ImageGrid rothe_u_step(const ImageGrid& u_prev, const ImageGrid& w_curr, const RotheConfig& cfg,
                             const PotentialProfile& profile) {
  return rothe_u_step_full(u_prev, w_curr, cfg, profile).x;
}

/// Largest singular value of the blur operator on an R x C grid, by power iteration on K'K.
inline double blur_operator_norm(const BlurKernel& kernel, std::size_t rows, std::size_t cols, int iterations = 60) {
  ImageGrid x(rows, cols, 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) x.values()[k] = 1.0 + 0.1 * std::sin(1.7 * static_cast<double>(k));
  double sigma2 = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const double nx = std::sqrt(inner(x, x));
    x *= 1.0 / nx;
    ImageGrid y = apply_adjoint(kernel, apply_blur(kernel, x));
    sigma2 = inner(x, y);
    x = std::move(y);
  }
  return std::sqrt(sigma2);
}

/// Sup-norm bound e^{C0} (|Omega|+1) |f|_inf + e^{C0} assembled from the run's data terms.
inline double linf_bound(const ImageGrid& f, const RotheConfig& cfg, const BlurKernel& kernel) {
  const auto& ph = cfg.physics;
  const double T = cfg.T;
  const double k = blur_operator_norm(kernel, f.rows(), f.cols());
  const double area = static_cast<double>(f.size()) * f.h() * f.h();
  const double fl2 = l2_norm(f);
  const double a = T * ph.lambda1 + T * T * ph.lambda2 * ph.lambda3 * k * k * area + T * ph.lambda3 * k * k * area;
  const double b = T * ph.lambda2;
  const double c = T * T * ph.lambda2 * ph.lambda3 * k * (area + 1.0) * fl2 + T * ph.lambda3 * k * (area + 1.0) * fl2;
  const double c0 = std::max({a, b, c});
  return std::exp(c0) * (area + 1.0) * f.max_abs() + std::exp(c0);
}

struct RotheSlice {
  long j = 0;
  double t = 0.0;
  double w_seminorm = 0.0;     // J(w^j)
  double w_step_sq = 0.0;      // |w^j - w^{j-1}|^2
  double energy_lhs = 0.0;     // J(w^j) + (m p / 2T) |w^j - w^{j-1}|^2
  double energy_rhs = 0.0;     // J(w^{j-1}) + C/m, C = 2 p T lambda3^2 |K'(f-Ku^{j-1})|^2
  double u_energy = 0.0;       // E**(u^j; u^{j-1})
  long w_iterations = 0, u_iterations = 0;
  double w_grad = 0.0, u_grad = 0.0;
  double umax = 0.0, wmax = 0.0;
  long clamped_faces = 0;

  bool energy_ok() const { return energy_lhs <= energy_rhs * (1.0 + 1e-9) + 1e-12; }
};

struct RotheResult {
  ImageGrid u, w;
  std::vector<RotheSlice> slices;
  double linf_bound = 0.0;
  bool linf_exceeded = false;  // monitored, not an error
};

/// Called after slice j with (j, w^{j-1}, u^{j-1}, w^j, u^j).
using RotheObserver = std::function<void(long, const ImageGrid&, const ImageGrid&, const ImageGrid&, const ImageGrid&)>;

inline RotheResult rothe_run(const ImageGrid& f_in, const RotheConfig& cfg, const BlurKernel& kernel,
                             const RotheObserver& observer = {}) {
  cfg.validate();
  if (!cfg.allow_large && f_in.size() > cfg.max_pixels) {
    throw ValidationError("rothe_run: grid " + f_in.shape_str() + " exceeds the desk-scale limit of " +
                          std::to_string(cfg.max_pixels) + " pixels (set allow_large to override)");
  }
  ImageGrid f = f_in;
  f.set_h(cfg.physics.h);
  NonlocalMode mode = NonlocalMode::dense();
  mode.domain = cfg.physics.nonlocal.domain;
  const NonlocalPlan plan = build_plan(f.rows(), f.cols(), f.h(), cfg.physics.s, cfg.physics.p, mode);
  const PotentialProfile profile = convexify(cfg.physics.gamma, cfg.physics.delta, cfg.smax);
  const double p = cfg.physics.p;
  const double h2 = f.h() * f.h();

  RotheResult out{f, ImageGrid(f.rows(), f.cols(), 0.0, f.h()), {}, linf_bound(f, cfg, kernel), false};
  for (long j = 1; j <= cfg.m; ++j) {
    RotheSlice sl;
    sl.j = j;
    sl.t = cfg.tau() * static_cast<double>(j);
    const WStepObjective wobj = make_w_objective(out.w, out.u, f, cfg, plan, kernel);
    double gsq = 0.0;
    for (double v : wobj.g.values()) gsq += v * v;
    gsq *= h2;
    const double j_prev = wobj.seminorm(out.w);

    InnerResult wr = rothe_w_step_full(out.w, out.u, f, cfg, plan, kernel);
    double dsq = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double d = wr.x.values()[k] - out.w.values()[k];
      dsq += d * d;
    }
    dsq *= h2;
    sl.w_seminorm = wobj.seminorm(wr.x);
    sl.w_step_sq = dsq;
    sl.energy_lhs = sl.w_seminorm + static_cast<double>(cfg.m) * p / (2.0 * cfg.T) * dsq;
    sl.energy_rhs = j_prev + 2.0 * p * cfg.T * cfg.physics.lambda3 * cfg.physics.lambda3 * gsq / static_cast<double>(cfg.m);
    sl.w_iterations = wr.iterations;
    sl.w_grad = wr.grad_norm;

    InnerResult ur = rothe_u_step_full(out.u, wr.x, cfg, profile);
    sl.u_energy = ur.objective;
    sl.u_iterations = ur.iterations;
    sl.u_grad = ur.grad_norm;
    sl.clamped_faces = ur.clamped_faces;

    if (observer) observer(j, out.w, out.u, wr.x, ur.x);
    out.w = std::move(wr.x);
    out.u = std::move(ur.x);
    sl.umax = out.u.max_abs();
    sl.wmax = out.w.max_abs();
    out.linf_exceeded = out.linf_exceeded || sl.umax > out.linf_bound || sl.wmax > out.linf_bound;
    out.slices.push_back(sl);
  }
  return out;
}

inline void write_rothe_csv(const RotheResult& r, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path + "'");
  os << "slice,t,w_seminorm,w_step_sq,energy_lhs,energy_rhs,u_energy,w_iterations,u_iterations,w_grad,u_grad,umax,"
        "wmax,clamped_faces\n";
  for (const auto& s : r.slices) {
    os << s.j << ',' << format_double(s.t) << ',' << format_double(s.w_seminorm) << ',' << format_double(s.w_step_sq)
       << ',' << format_double(s.energy_lhs) << ',' << format_double(s.energy_rhs) << ','
       << format_double(s.u_energy) << ',' << s.w_iterations << ',' << s.u_iterations << ','
       << format_double(s.w_grad) << ',' << format_double(s.u_grad) << ',' << format_double(s.umax) << ','
       << format_double(s.wmax) << ',' << s.clamped_faces << "\n";
  }
}

}  // namespace fbfrac
