#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "fbfrac/error.hpp"
#include "fbfrac/grid.hpp"

namespace fbfrac {

/// sign_0: r/|r| for r != 0 and 0 at r = 0 (including -0.0).
inline double sign0(double r) noexcept { return static_cast<double>((r > 0.0) - (r < 0.0)); }

enum class NonlocalKind { automatic, dense, truncated, fft_p2 };

/// Which pixel pairs enter the sum. all_pairs includes every (k,l) != (i,j); exclude_axes
/// drops pairs sharing a row or a column (a literal reading of the discrete formula).
enum class SumDomain { all_pairs, exclude_axes };

struct NonlocalMode {
  NonlocalKind kind = NonlocalKind::automatic;
  int radius = 15;
  SumDomain domain = SumDomain::all_pairs;

  static NonlocalMode dense(SumDomain d = SumDomain::all_pairs) { return {NonlocalKind::dense, 0, d}; }
  static NonlocalMode truncated(int r, SumDomain d = SumDomain::all_pairs) {
    return {NonlocalKind::truncated, r, d};
  }
  static NonlocalMode fft_p2(SumDomain d = SumDomain::all_pairs) { return {NonlocalKind::fft_p2, 0, d}; }
};

inline std::string to_string(NonlocalKind k) {
  switch (k) {
    case NonlocalKind::automatic: return "auto";
    case NonlocalKind::dense: return "dense";
    case NonlocalKind::truncated: return "truncated";
    case NonlocalKind::fft_p2: return "fft_p2";
  }
  return "?";
}

inline NonlocalKind parse_nonlocal_kind(const std::string& s) {
  if (s == "auto") return NonlocalKind::automatic;
  if (s == "dense") return NonlocalKind::dense;
  if (s == "truncated") return NonlocalKind::truncated;
  if (s == "fft_p2") return NonlocalKind::fft_p2;
  throw ValidationError("unknown nonlocal mode '" + s + "' (auto|dense|truncated|fft_p2)");
}

/// Grids up to this many pixels resolve `automatic` to dense; larger ones to truncated.
inline constexpr std::size_t kDenseAutoLimit = 64 * 64;

struct WeightedOffset {
  int di;
  int dj;
  double w;
};

namespace detail {

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

// FFTW planning is not thread-safe; all plan creation and destruction goes through this lock.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Zero-padded circular convolution with the distance kernel. Sizes are >= 2N-1 so that
/// no wrap-around reaches the image region.
class FftConvolver {
 public:
  FftConvolver(std::size_t rows, std::size_t cols, const std::vector<WeightedOffset>& offsets)
      : rows_(rows), cols_(cols), pr_(2 * rows), pc_(2 * cols), pch_(pc_ / 2 + 1) {
    std::vector<double> kernel(pr_ * pc_, 0.0);
    for (const auto& o : offsets) {
      const std::size_t r = static_cast<std::size_t>((o.di + static_cast<long>(pr_)) % static_cast<long>(pr_));
      const std::size_t c = static_cast<std::size_t>((o.dj + static_cast<long>(pc_)) % static_cast<long>(pc_));
      kernel[r * pc_ + c] = o.w;
    }
    auto in = alloc_real();
    auto out = alloc_complex();
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fwd_ = fftw_plan_dft_r2c_2d(static_cast<int>(pr_), static_cast<int>(pc_), in.get(), out.get(),
                                  FFTW_ESTIMATE);
      bwd_ = fftw_plan_dft_c2r_2d(static_cast<int>(pr_), static_cast<int>(pc_), out.get(), in.get(),
                                  FFTW_ESTIMATE);
    }
    std::copy(kernel.begin(), kernel.end(), in.get());
    fftw_execute_dft_r2c(fwd_, in.get(), out.get());
    spectrum_.assign(reinterpret_cast<std::complex<double>*>(out.get()),
                     reinterpret_cast<std::complex<double>*>(out.get()) + pr_ * pch_);
  }

  FftConvolver(const FftConvolver&) = delete;
  FftConvolver& operator=(const FftConvolver&) = delete;

  ~FftConvolver() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  /// out(x) = sum_y W(y-x) in(y) over the image region.
  void convolve(std::span<const double> input, std::span<double> output) const {
    auto in = alloc_real();
    auto out = alloc_complex();
    std::fill(in.get(), in.get() + pr_ * pc_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      std::copy_n(input.data() + i * cols_, cols_, in.get() + i * pc_);
    fftw_execute_dft_r2c(fwd_, in.get(), out.get());
    auto* z = reinterpret_cast<std::complex<double>*>(out.get());
    for (std::size_t k = 0; k < pr_ * pch_; ++k) z[k] *= spectrum_[k];
    fftw_execute_dft_c2r(bwd_, out.get(), in.get());
    const double scale = 1.0 / static_cast<double>(pr_ * pc_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) output[i * cols_ + j] = in.get()[i * pc_ + j] * scale;
  }

 private:
  std::unique_ptr<double, FftwFree> alloc_real() const {
    return std::unique_ptr<double, FftwFree>(fftw_alloc_real(pr_ * pc_));
  }
  std::unique_ptr<fftw_complex, FftwFree> alloc_complex() const {
    return std::unique_ptr<fftw_complex, FftwFree>(fftw_alloc_complex(pr_ * pch_));
  }

  std::size_t rows_, cols_, pr_, pc_, pch_;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
  std::vector<std::complex<double>> spectrum_;
};

}  // namespace detail

/// Precomputed translation-invariant weights W(di,dj) = (h sqrt(di^2+dj^2))^-(2+sp) and the
/// backend used to apply the discrete fractional p-Laplacian. Immutable after construction.
class NonlocalPlan {
 public:
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double h() const noexcept { return h_; }
  double s() const noexcept { return s_; }
  double p() const noexcept { return p_; }
  /// Resolved mode (never `automatic`).
  const NonlocalMode& mode() const noexcept { return mode_; }
  /// Offsets summed by apply (dense: every in-domain offset; truncated: the disk of radius R).
  const std::vector<WeightedOffset>& offsets() const noexcept { return offsets_; }

  /// Distance weight for an offset; 0 for an excluded offset or the origin.
  double weight(int di, int dj) const {
    if (!in_domain(di, dj)) return 0.0;
    const double d = h_ * std::sqrt(static_cast<double>(di) * di + static_cast<double>(dj) * dj);
    return std::pow(d, -(2.0 + s_ * p_));
  }

  bool in_domain(int di, int dj) const noexcept {
    if (di == 0 && dj == 0) return false;
    if (mode_.domain == SumDomain::exclude_axes && (di == 0 || dj == 0)) return false;
    return true;
  }

  /// Per-pixel bound on |dense - truncated|: sum over omitted offsets of W * (2 |w|_inf)^(p-1).
  double tail_bound(double w_inf) const {
    if (mode_.kind != NonlocalKind::truncated) return 0.0;
    const double r2 = static_cast<double>(mode_.radius) * mode_.radius;
    double tail = 0.0;
    const int R = static_cast<int>(rows_), C = static_cast<int>(cols_);
    for (int di = -(R - 1); di <= R - 1; ++di)
      for (int dj = -(C - 1); dj <= C - 1; ++dj)
        if (static_cast<double>(di) * di + static_cast<double>(dj) * dj > r2) tail += weight(di, dj);
    return tail * std::pow(2.0 * w_inf, p_ - 1.0);
  }

  const detail::FftConvolver* fft() const noexcept { return fft_.get(); }
  /// Row sums S(x) = sum_{y in grid, y != x} W(y-x), used by the FFT path.
  const std::vector<double>& degree() const noexcept { return degree_; }

 private:
  friend NonlocalPlan build_plan(std::size_t, std::size_t, double, double, double, NonlocalMode);

  std::size_t rows_ = 0, cols_ = 0;
  double h_ = 1.0, s_ = 0.5, p_ = 1.0;
  NonlocalMode mode_;
  std::vector<WeightedOffset> offsets_;
  std::shared_ptr<const detail::FftConvolver> fft_;
  std::vector<double> degree_;
};

inline NonlocalPlan build_plan(std::size_t rows, std::size_t cols, double h, double s, double p,
                               NonlocalMode mode) {
  if (rows < 2 || cols < 2) throw ValidationError("build_plan: grid must be at least 2x2");
  if (!(h > 0.0)) throw ValidationError("build_plan: h must be positive");
  if (!(s > 0.0 && s < 1.0)) throw ValidationError("build_plan: s must lie in (0,1)");
  if (!(p >= 1.0 && p <= 2.0)) throw ValidationError("build_plan: p must lie in [1,2]");
  if (mode.kind == NonlocalKind::automatic) {
    mode.kind = rows * cols <= kDenseAutoLimit ? NonlocalKind::dense : NonlocalKind::truncated;
  }
  if (mode.kind == NonlocalKind::truncated && mode.radius < 1) {
    throw ValidationError("build_plan: truncation radius must be >= 1");
  }
  if (mode.kind == NonlocalKind::fft_p2 && p != 2.0) {
    throw ValidationError("build_plan: fft_p2 mode requires p = 2");
  }

  NonlocalPlan plan;
  plan.rows_ = rows;
  plan.cols_ = cols;
  plan.h_ = h;
  plan.s_ = s;
  plan.p_ = p;
  plan.mode_ = mode;

  const int R = static_cast<int>(rows), C = static_cast<int>(cols);
  const bool truncate = mode.kind == NonlocalKind::truncated;
  const double r2 = static_cast<double>(mode.radius) * mode.radius;
  for (int di = -(R - 1); di <= R - 1; ++di) {
    for (int dj = -(C - 1); dj <= C - 1; ++dj) {
      if (!plan.in_domain(di, dj)) continue;
      if (truncate && static_cast<double>(di) * di + static_cast<double>(dj) * dj > r2) continue;
      plan.offsets_.push_back({di, dj, plan.weight(di, dj)});
    }
  }

  if (mode.kind == NonlocalKind::fft_p2) {
    auto conv = std::make_shared<const detail::FftConvolver>(rows, cols, plan.offsets_);
    std::vector<double> ones(rows * cols, 1.0);
    plan.degree_.assign(rows * cols, 0.0);
    conv->convolve(ones, plan.degree_);
    plan.fft_ = std::move(conv);
  }
  return plan;
}

namespace detail {

struct PowerSign1 {
  double operator()(double d) const noexcept { return (d > 0.0 ? 1.0 : 0.0) - (d < 0.0 ? 1.0 : 0.0); }
};
struct PowerLinear {
  double operator()(double d) const noexcept { return d; }
};
struct PowerGeneral {
  double q;  // p - 1
  double operator()(double d) const noexcept { return d == 0.0 ? 0.0 : sign0(d) * std::pow(std::abs(d), q); }
};

template <class Phi>
void apply_offsets(const NonlocalPlan& plan, const ImageGrid& w, ImageGrid& out, Phi phi) {
  const long R = static_cast<long>(w.rows()), C = static_cast<long>(w.cols());
  const auto& offs = plan.offsets();
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < R; ++i) {
    const double* wi = w.row(static_cast<std::size_t>(i));
    double* o = out.row(static_cast<std::size_t>(i));
    for (const auto& off : offs) {
      const long ii = i + off.di;
      if (ii < 0 || ii >= R) continue;
      const double* wn = w.row(static_cast<std::size_t>(ii)) + off.dj;
      const long j0 = std::max(0L, -static_cast<long>(off.dj));
      const long j1 = std::min(C, C - off.dj);
      const double wt = off.w;
      for (long j = j0; j < j1; ++j) o[j] += wt * phi(wn[j] - wi[j]);
    }
  }
}

}  // namespace detail

/// (Delta_p^s w)(x) = sum_y W(y-x) sign0(w(y)-w(x)) |w(y)-w(x)|^(p-1) over the plan's sum domain.
inline ImageGrid apply_frac_p_laplacian(const NonlocalPlan& plan, const ImageGrid& w) {
  if (w.rows() != plan.rows() || w.cols() != plan.cols()) {
    throw ValidationError("apply_frac_p_laplacian: grid " + w.shape_str() + " does not match plan");
  }
  ImageGrid out(w.rows(), w.cols(), 0.0, w.h());
  if (plan.mode().kind == NonlocalKind::fft_p2) {
    plan.fft()->convolve(w.values(), out.values());
    auto o = out.values();
    auto wv = w.values();
    const auto& deg = plan.degree();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] -= wv[k] * deg[k];
    return out;
  }
  const double p = plan.p();
  if (p == 1.0) {
    detail::apply_offsets(plan, w, out, detail::PowerSign1{});
  } else if (p == 2.0) {
    detail::apply_offsets(plan, w, out, detail::PowerLinear{});
  } else {
    detail::apply_offsets(plan, w, out, detail::PowerGeneral{p - 1.0});
  }
  return out;
}

/// Discrete Gagliardo energy h^4 sum_{x} sum_{y != x} W(y-x) |w(y)-w(x)|^p over ordered pairs.
/// The FFT plan uses the full dense pair set.
inline double frac_seminorm_p(const NonlocalPlan& plan, const ImageGrid& w) {
  if (w.rows() != plan.rows() || w.cols() != plan.cols()) {
    throw ValidationError("frac_seminorm_p: grid " + w.shape_str() + " does not match plan");
  }
  const long R = static_cast<long>(w.rows()), C = static_cast<long>(w.cols());
  const double p = plan.p();
  const auto& offs = plan.offsets();
  double total = 0.0;
#pragma omp parallel for reduction(+ : total) schedule(static)
  for (long i = 0; i < R; ++i) {
    const double* wi = w.row(static_cast<std::size_t>(i));
    double acc = 0.0;
    for (const auto& off : offs) {
      const long ii = i + off.di;
      if (ii < 0 || ii >= R) continue;
      const double* wn = w.row(static_cast<std::size_t>(ii)) + off.dj;
      const long j0 = std::max(0L, -static_cast<long>(off.dj));
      const long j1 = std::min(C, C - off.dj);
      double row = 0.0;
      if (p == 2.0) {
        for (long j = j0; j < j1; ++j) {
          const double d = wn[j] - wi[j];
          row += d * d;
        }
      } else if (p == 1.0) {
        for (long j = j0; j < j1; ++j) row += std::abs(wn[j] - wi[j]);
      } else {
        for (long j = j0; j < j1; ++j) row += std::pow(std::abs(wn[j] - wi[j]), p);
      }
      acc += off.w * row;
    }
    total += acc;
  }
  const double h2 = w.h() * w.h();
  return h2 * h2 * total;
}

}  // namespace fbfrac
