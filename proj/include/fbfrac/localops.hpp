#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "fbfrac/grid.hpp"
#include "fbfrac/solver_config.hpp"

namespace fbfrac {

/// Face fluxes: qx lives on the face between (i,j) and (i+1,j), qy between (i,j) and (i,j+1).
struct FluxField {
  ImageGrid qx;
  ImageGrid qy;
};

inline double minmod(double a, double b) noexcept {
  return 0.5 * (sign0(a) + sign0(b)) * std::min(std::abs(a), std::abs(b));
}

namespace detail {

// Ghost replication: u_{-1} = u_0 and u_{N} = u_{N-1}, so one-sided differences vanish at
// the matching boundary.
inline double fwd_x(const ImageGrid& u, std::size_t i, std::size_t j) {
  return i + 1 < u.rows() ? (u(i + 1, j) - u(i, j)) / u.h() : 0.0;
}
inline double bwd_x(const ImageGrid& u, std::size_t i, std::size_t j) {
  return i > 0 ? (u(i, j) - u(i - 1, j)) / u.h() : 0.0;
}
inline double fwd_y(const ImageGrid& u, std::size_t i, std::size_t j) {
  return j + 1 < u.cols() ? (u(i, j + 1) - u(i, j)) / u.h() : 0.0;
}
inline double bwd_y(const ImageGrid& u, std::size_t i, std::size_t j) {
  return j > 0 ? (u(i, j) - u(i, j - 1)) / u.h() : 0.0;
}

template <class Op>
ImageGrid map_pixels(const ImageGrid& u, Op op) {
  ImageGrid out(u.rows(), u.cols(), 0.0, u.h());
  for (std::size_t i = 0; i < u.rows(); ++i)
    for (std::size_t j = 0; j < u.cols(); ++j) out(i, j) = op(i, j);
  return out;
}

}  // namespace detail

inline ImageGrid forward_diff_x(const ImageGrid& u) {
  return detail::map_pixels(u, [&](std::size_t i, std::size_t j) { return detail::fwd_x(u, i, j); });
}
inline ImageGrid backward_diff_x(const ImageGrid& u) {
  return detail::map_pixels(u, [&](std::size_t i, std::size_t j) { return detail::bwd_x(u, i, j); });
}
inline ImageGrid forward_diff_y(const ImageGrid& u) {
  return detail::map_pixels(u, [&](std::size_t i, std::size_t j) { return detail::fwd_y(u, i, j); });
}
inline ImageGrid backward_diff_y(const ImageGrid& u) {
  return detail::map_pixels(u, [&](std::size_t i, std::size_t j) { return detail::bwd_y(u, i, j); });
}

/// d^x = (D+x u)^2 + eps (D+y u)^2 + (1-eps) minmod(D+y u, D-y u)^2.
inline ImageGrid diffusivity_x(const ImageGrid& u, int eps) {
  const double e = eps;
  return detail::map_pixels(u, [&](std::size_t i, std::size_t j) {
    const double gx = detail::fwd_x(u, i, j);
    const double gy = detail::fwd_y(u, i, j);
    const double m = minmod(gy, detail::bwd_y(u, i, j));
    return gx * gx + e * gy * gy + (1.0 - e) * m * m;
  });
}

inline ImageGrid diffusivity_y(const ImageGrid& u, int eps) {
  const double e = eps;
  return detail::map_pixels(u, [&](std::size_t i, std::size_t j) {
    const double gy = detail::fwd_y(u, i, j);
    const double gx = detail::fwd_x(u, i, j);
    const double m = minmod(gx, detail::bwd_x(u, i, j));
    return gy * gy + e * gx * gx + (1.0 - e) * m * m;
  });
}

/// Regularized forward-backward face flux. Both the Perona-Malik part and the
/// delta-part use the same forward differences. Boundary faces (last row for qx, last
/// column for qy) come out zero because the ghost-replicated forward difference is zero.
inline FluxField flux(const ImageGrid& u, const SolverConfig& cfg) {
  const std::size_t R = u.rows(), C = u.cols();
  const double ih = 1.0 / u.h();
  const double eps = cfg.eps;
  const double expo = 0.5 * cfg.gamma - 1.0;
  FluxField fl{ImageGrid(R, C, 0.0, u.h()), ImageGrid(R, C, 0.0, u.h())};
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < R; ++i) {
    const double* up = u.row(i);
    const double* un = i + 1 < R ? u.row(i + 1) : up;
    const double* uprev = i > 0 ? u.row(i - 1) : up;
    double* qx = fl.qx.row(i);
    double* qy = fl.qy.row(i);
    for (std::size_t j = 0; j < C; ++j) {
      const std::size_t jn = j + 1 < C ? j + 1 : j;
      const std::size_t jp = j > 0 ? j - 1 : j;
      const double gxp = (un[j] - up[j]) * ih;
      const double gxm = (up[j] - uprev[j]) * ih;
      const double gyp = (up[jn] - up[j]) * ih;
      const double gym = (up[j] - up[jp]) * ih;
      const double mx = minmod(gxp, gxm);
      const double my = minmod(gyp, gym);
      const double dx = gxp * gxp + eps * gyp * gyp + (1.0 - eps) * my * my;
      const double dy = gyp * gyp + eps * gxp * gxp + (1.0 - eps) * mx * mx;
      const double pm = 1.0 / (1.0 + gxp * gxp + gyp * gyp);
      qx[j] = gxp * pm + cfg.delta * std::pow(cfg.e + dx, expo) * gxp;
      qy[j] = gyp * pm + cfg.delta * std::pow(cfg.e + dy, expo) * gyp;
    }
    if (i + 1 == R) std::fill(qx, qx + C, 0.0);
    qy[C - 1] = 0.0;
  }
  return fl;
}

/// Backward-difference divergence D-x qx + D-y qy. Faces outside the grid and the
/// boundary faces (last row of qx, last column of qy) are treated as closed, so the
/// grid sum of the result telescopes to zero.
inline ImageGrid divergence(const FluxField& fl) {
  const std::size_t R = fl.qx.rows(), C = fl.qx.cols();
  fl.qx.require_same_shape(fl.qy, "divergence");
  const double ih = 1.0 / fl.qx.h();
  ImageGrid out(R, C, 0.0, fl.qx.h());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < R; ++i) {
    const double* qx = fl.qx.row(i);
    const double* qxm = i > 0 ? fl.qx.row(i - 1) : nullptr;
    const double* qy = fl.qy.row(i);
    double* o = out.row(i);
    for (std::size_t j = 0; j < C; ++j) {
      const double here_x = i + 1 < R ? qx[j] : 0.0;
      const double prev_x = qxm ? qxm[j] : 0.0;
      const double here_y = j + 1 < C ? qy[j] : 0.0;
      const double prev_y = j > 0 ? qy[j - 1] : 0.0;
      o[j] = (here_x - prev_x) * ih + (here_y - prev_y) * ih;
    }
  }
  return out;
}

/// Scalar face-flux law t -> t/(1+t^2) + delta (e+t^2)^(gamma/2-1) t of a 1-D profile.
inline double scalar_face_flux(double t, double delta, double gamma, double e) {
  return t / (1.0 + t * t) + delta * std::pow(e + t * t, 0.5 * gamma - 1.0) * t;
}

}  // namespace fbfrac
