#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fbfrac/blur.hpp"
#include "fbfrac/error.hpp"
#include "fbfrac/grid.hpp"
#include "fbfrac/localops.hpp"
#include "fbfrac/metrics.hpp"
#include "fbfrac/nonlocal.hpp"
#include "fbfrac/solver_config.hpp"

namespace fbfrac {

struct RestorationState {
  ImageGrid u;
  ImageGrid w;
  long step = 0;
  double t = 0.0;
};

inline RestorationState initial_state(const ImageGrid& f) {
  return {f, ImageGrid(f.rows(), f.cols(), 0.0, f.h()), 0, 0.0};
}

inline NonlocalPlan plan_for(const ImageGrid& f, const SolverConfig& cfg) {
  return build_plan(f.rows(), f.cols(), cfg.h, cfg.s, cfg.p, cfg.nonlocal);
}

/// One explicit step. w is advanced first; the u-update consumes w^{n+1}.
inline RestorationState step(const RestorationState& st, const ImageGrid& f, const SolverConfig& cfg,
                             const NonlocalPlan& plan, const BlurKernel& kernel) {
  st.u.require_same_shape(f, "step(u, f)");
  st.w.require_same_shape(f, "step(w, f)");
  if (plan.rows() != f.rows() || plan.cols() != f.cols())
    throw ValidationError("step: nonlocal plan built for a different grid");
  const double dt = cfg.dt;

  ImageGrid resid = apply_blur(kernel, st.u);
  resid -= f;
  const ImageGrid back = apply_adjoint(kernel, resid);
  const ImageGrid lap = apply_frac_p_laplacian(plan, st.w);
  const ImageGrid div = divergence(flux(st.u, cfg));

  RestorationState next{st.u, st.w, st.step + 1, static_cast<double>(st.step + 1) * dt};
  const std::size_t N = f.size();
  const double* w0 = st.w.values().data();
  const double* u0 = st.u.values().data();
  const double* L = lap.values().data();
  const double* B = back.values().data();
  const double* D = div.values().data();
  double* w1 = next.w.values().data();
  double* u1 = next.u.values().data();
  bool finite = true;
  for (std::size_t k = 0; k < N; ++k) {
    w1[k] = w0[k] + dt * L[k] - cfg.lambda3 * dt * B[k];
    u1[k] = u0[k] + dt * D[k] - cfg.lambda1 * dt * u0[k] + cfg.lambda2 * dt * w1[k];
    finite = finite && std::isfinite(w1[k]) && std::isfinite(u1[k]);
  }
  if (!finite) throw DivergenceError(next.step, "non-finite state after step " + std::to_string(next.step));
  return next;
}

struct HistoryRecord {
  long step = 0;
  double psnr = std::numeric_limits<double>::quiet_NaN();
  double residual = std::numeric_limits<double>::quiet_NaN();
  double umin = 0.0;
  double umax = 0.0;
  double wall_ms = 0.0;
};

struct RunHooks {
  long snapshot_every = 0;  // 0 disables
  std::function<void(const RestorationState&)> on_snapshot;
};

struct RunResult {
  RestorationState state;  // best-PSNR state in oracle mode, smallest residual on exhaustion
  std::vector<HistoryRecord> history;
  long steps_taken = 0;
  bool max_steps_reached = false;
  double wall_ms = 0.0;
};

inline RunResult run(const ImageGrid& f_in, const SolverConfig& cfg, const BlurKernel& kernel,
                     const RunHooks& hooks = {}) {
  cfg.validate();
  ImageGrid f = f_in;
  f.set_h(cfg.h);
  const auto& pol = cfg.stop;
  const ImageGrid* ref = pol.reference.get();
  if (pol.mode == StopMode::oracle) {
    if (!ref) throw ValidationError("oracle stopping requires a reference image");
    ref->require_same_shape(f, "oracle reference");
  }
  const NonlocalPlan plan = plan_for(f, cfg);
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed_ms = [&] { return std::chrono::duration<double, std::milli>(clock::now() - t0).count(); };

  RunResult out;
  RestorationState cur = initial_state(f);
  auto record = [&](const RestorationState& s, double residual) {
    HistoryRecord r;
    r.step = s.step;
    if (ref) r.psnr = psnr(s.u, *ref);
    r.residual = residual;
    r.umin = s.u.min();
    r.umax = s.u.max();
    r.wall_ms = elapsed_ms();
    out.history.push_back(r);
    return r;
  };
  auto snapshot = [&](const RestorationState& s) {
    if (hooks.snapshot_every > 0 && hooks.on_snapshot && s.step % hooks.snapshot_every == 0) hooks.on_snapshot(s);
  };

  const HistoryRecord first = record(cur, std::numeric_limits<double>::quiet_NaN());
  snapshot(cur);
  RestorationState best = cur;
  double best_score = pol.mode == StopMode::oracle ? first.psnr : std::numeric_limits<double>::infinity();
  int since_best = 0;
  const long limit = pol.mode == StopMode::fixed ? pol.steps : cfg.max_steps;

  bool done = limit == 0;
  while (!done) {
    RestorationState next = step(cur, f, cfg, plan, kernel);
    const double un = l2_norm(cur.u);
    const double du = l2_distance(next.u, cur.u);
    const double residual = un > 0.0 ? du / un : du;
    cur = std::move(next);
    const HistoryRecord r = record(cur, residual);
    snapshot(cur);
    switch (pol.mode) {
      case StopMode::fixed: break;
      case StopMode::oracle:
        if (r.psnr > best_score) {
          best_score = r.psnr;
          best = cur;
          since_best = 0;
        } else if (++since_best >= pol.patience) {
          done = true;
        }
        break;
      case StopMode::residual:
        if (residual < best_score) {
          best_score = residual;
          best = cur;
        }
        if (residual < pol.tol) {
          best = cur;
          done = true;
        }
        break;
    }
    if (!done && cur.step >= limit) {
      done = true;
      out.max_steps_reached = pol.mode != StopMode::fixed;
    }
  }
  out.steps_taken = cur.step;
  out.state = pol.mode == StopMode::fixed ? std::move(cur) : std::move(best);
  out.wall_ms = elapsed_ms();
  return out;
}

inline constexpr const char* kHistoryHeader = "step,psnr,residual,umin,umax,wall_ms";

inline void write_history_csv(const std::vector<HistoryRecord>& hist, std::ostream& os) {
  os << kHistoryHeader << "\n";
  for (const auto& r : hist) {
    os << r.step << ',' << format_double(r.psnr) << ',' << format_double(r.residual) << ','
       << format_double(r.umin) << ',' << format_double(r.umax) << ',' << format_double(r.wall_ms) << "\n";
  }
}

inline void write_history_csv(const std::vector<HistoryRecord>& hist, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write history '" + path + "'");
  write_history_csv(hist, os);
}

/// Snapshot hook writing u_<step>.pgm and w_<step>.pgm into `dir`; the stored w byte is w + 128.
inline RunHooks pgm_snapshot_hooks(const std::string& dir, long every) {
  std::filesystem::create_directories(dir);
  RunHooks h;
  h.snapshot_every = every;
  h.on_snapshot = [dir](const RestorationState& s) {
    char name[32];
    std::snprintf(name, sizeof name, "%06ld", s.step);
    save_pgm(s.u, dir + "/u_" + name + ".pgm");
    ImageGrid w = s.w;
    for (double& v : w.values()) v += 128.0;
    save_pgm(w, dir + "/w_" + name + ".pgm");
  };
  return h;
}

}  // namespace fbfrac
