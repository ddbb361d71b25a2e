#include <gtest/gtest.h>

#include "support.hpp"

using namespace fbfrac;

namespace {

// Ghost-padded copy: index (i+1, j+1) holds u(i,j); the ring replicates the nearest edge.
struct Ghost {
  std::size_t R, C;
  std::vector<double> a;
  explicit Ghost(const ImageGrid& u) : R(u.rows()), C(u.cols()), a((u.rows() + 2) * (u.cols() + 2)) {
    for (std::size_t i = 0; i < R + 2; ++i)
      for (std::size_t j = 0; j < C + 2; ++j) {
        const std::size_t si = i == 0 ? 0 : (i == R + 1 ? R - 1 : i - 1);
        const std::size_t sj = j == 0 ? 0 : (j == C + 1 ? C - 1 : j - 1);
        a[i * (C + 2) + j] = u(si, sj);
      }
  }
  double operator()(long i, long j) const { return a[static_cast<std::size_t>(i + 1) * (C + 2) + static_cast<std::size_t>(j + 1)]; }
};

double mm(double a, double b) {
  if (a > 0 && b > 0) return std::min(a, b);
  if (a < 0 && b < 0) return std::max(a, b);
  return 0.0;
}

}  // namespace

TEST(Minmod, Examples) {
  EXPECT_EQ(minmod(2, 3), 2.0);
  EXPECT_EQ(minmod(-1, 2), 0.0);
  EXPECT_EQ(minmod(0, 5), 0.0);
  EXPECT_EQ(minmod(-4, -1.5), -1.5);
}

TEST(Minmod, SymmetricAndBounded) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-10, 10);
  for (int k = 0; k < 10000; ++k) {
    const double a = d(rng), b = k % 7 == 0 ? 0.0 : d(rng);
    EXPECT_EQ(minmod(a, b), minmod(b, a));
    EXPECT_LE(std::abs(minmod(a, b)), std::min(std::abs(a), std::abs(b)));
    EXPECT_EQ(minmod(a, b), mm(a, b));
  }
}

TEST(Differences, ConstantAndRamp) {
  ImageGrid c(5, 6, 4.2);
  for (auto* op : {&forward_diff_x, &forward_diff_y, &backward_diff_x, &backward_diff_y})
    EXPECT_EQ(op(c).max_abs(), 0.0);
  const double h = 0.5;
  ImageGrid ramp(6, 5, 0.0, h);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 5; ++j) ramp(i, j) = static_cast<double>(i) * h;
  const auto fx = forward_diff_x(ramp);
  const auto bx = backward_diff_x(ramp);
  for (std::size_t j = 0; j < 5; ++j) {
    for (std::size_t i = 0; i + 1 < 6; ++i) EXPECT_DOUBLE_EQ(fx(i, j), 1.0);
    EXPECT_EQ(fx(5, j), 0.0);
    EXPECT_EQ(bx(0, j), 0.0);
    for (std::size_t i = 1; i < 6; ++i) EXPECT_DOUBLE_EQ(bx(i, j), 1.0);
  }
  EXPECT_EQ(forward_diff_y(ramp).max_abs(), 0.0);
}

TEST(Differences, MatchGhostCellOracle) {
  const auto u = fbtest::random_image(8, 8, 42, 0, 255, 0.7);
  const Ghost g(u);
  const auto fx = forward_diff_x(u), bx = backward_diff_x(u), fy = forward_diff_y(u), by = backward_diff_y(u);
  for (long i = 0; i < 8; ++i)
    for (long j = 0; j < 8; ++j) {
      EXPECT_EQ(fx(i, j), (g(i + 1, j) - g(i, j)) / 0.7);
      EXPECT_EQ(bx(i, j), (g(i, j) - g(i - 1, j)) / 0.7);
      EXPECT_EQ(fy(i, j), (g(i, j + 1) - g(i, j)) / 0.7);
      EXPECT_EQ(by(i, j), (g(i, j) - g(i, j - 1)) / 0.7);
    }
}

TEST(Diffusivity, ConstantRampAndOracle) {
  EXPECT_EQ(diffusivity_x(ImageGrid(4, 4, 3.0), 0).max_abs(), 0.0);
  ImageGrid ramp(6, 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) ramp(i, j) = static_cast<double>(i);
  const auto dx = diffusivity_x(ramp, 0);
  for (std::size_t i = 0; i + 1 < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_DOUBLE_EQ(dx(i, j), 1.0);

  const auto u = fbtest::random_image(8, 8, 7);
  const Ghost g(u);
  for (int eps : {0, 1}) {
    const auto ax = diffusivity_x(u, eps), ay = diffusivity_y(u, eps);
    for (long i = 0; i < 8; ++i)
      for (long j = 0; j < 8; ++j) {
        const double pxv = g(i + 1, j) - g(i, j), mxv = g(i, j) - g(i - 1, j);
        const double pyv = g(i, j + 1) - g(i, j), myv = g(i, j) - g(i, j - 1);
        const double ox = pxv * pxv + eps * pyv * pyv + (1 - eps) * mm(pyv, myv) * mm(pyv, myv);
        const double oy = pyv * pyv + eps * pxv * pxv + (1 - eps) * mm(pxv, mxv) * mm(pxv, mxv);
        EXPECT_NEAR(ax(i, j), ox, 1e-12);
        EXPECT_NEAR(ay(i, j), oy, 1e-12);
        EXPECT_GE(ax(i, j), 0.0);
        EXPECT_GE(ay(i, j), 0.0);
      }
  }
}

TEST(Flux, ConstantImageGivesZero) {
  SolverConfig cfg;
  const auto fl = flux(ImageGrid(7, 5, 100.0), cfg);
  EXPECT_EQ(fl.qx.max_abs(), 0.0);
  EXPECT_EQ(fl.qy.max_abs(), 0.0);
}

TEST(Flux, RampInterior) {
  SolverConfig cfg;
  ImageGrid ramp(8, 8);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) ramp(i, j) = static_cast<double>(i);
  const auto fl = flux(ramp, cfg);
  const double expect = 0.5 + cfg.delta * std::pow(cfg.e + 1.0, cfg.gamma / 2.0 - 1.0);
  for (std::size_t i = 1; i + 1 < 8; ++i)
    for (std::size_t j = 1; j + 1 < 8; ++j) EXPECT_NEAR(fl.qx(i, j), expect, 1e-15);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(fl.qx(7, j), 0.0);
}

TEST(Flux, MatchesFormulaOracle) {
  const auto u = fbtest::random_image(8, 8, 99, 0, 20, 1.3);
  const Ghost g(u);
  for (int eps : {0, 1}) {
    SolverConfig cfg;
    cfg.eps = eps;
    cfg.h = 1.3;
    const auto fl = flux(u, cfg);
    for (long i = 0; i < 8; ++i)
      for (long j = 0; j < 8; ++j) {
        const double px = (g(i + 1, j) - g(i, j)) / 1.3, mx = (g(i, j) - g(i - 1, j)) / 1.3;
        const double py = (g(i, j + 1) - g(i, j)) / 1.3, my = (g(i, j) - g(i, j - 1)) / 1.3;
        const double dx = px * px + eps * py * py + (1 - eps) * mm(py, my) * mm(py, my);
        const double dy = py * py + eps * px * px + (1 - eps) * mm(px, mx) * mm(px, mx);
        const double pm = 1.0 + px * px + py * py;
        double qx = px / pm + cfg.delta * std::pow(cfg.e + dx, cfg.gamma / 2 - 1) * px;
        double qy = py / pm + cfg.delta * std::pow(cfg.e + dy, cfg.gamma / 2 - 1) * py;
        if (i == 7) qx = 0.0;
        if (j == 7) qy = 0.0;
        EXPECT_NEAR(fl.qx(i, j), qx, 1e-14);
        EXPECT_NEAR(fl.qy(i, j), qy, 1e-14);
      }
  }
}

TEST(Divergence, ZeroAndSingleFace) {
  FluxField z{ImageGrid(5, 5), ImageGrid(5, 5)};
  EXPECT_EQ(divergence(z).max_abs(), 0.0);
  z.qx(2, 3) = 1.0;
  const auto d = divergence(z);
  EXPECT_EQ(d(2, 3), 1.0);
  EXPECT_EQ(d(3, 3), -1.0);
  EXPECT_EQ(fbtest::sum(d), 0.0);
  EXPECT_EQ(d.max_abs(), 1.0);
}

TEST(Divergence, GridSumVanishes) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    FluxField fl{fbtest::random_image(13, 9, seed, -50, 50), fbtest::random_image(13, 9, seed + 100, -50, 50)};
    const auto d = divergence(fl);
    EXPECT_NEAR(fbtest::sum(d), 0.0, 1e-12 * 50 * 13 * 9);
  }
  SolverConfig cfg;
  const auto u = fbtest::random_image(16, 16, 5);
  EXPECT_NEAR(fbtest::sum(divergence(flux(u, cfg))), 0.0, 1e-12);
}

TEST(Divergence, IgnoresBoundaryFaces) {
  FluxField fl{ImageGrid(4, 4), ImageGrid(4, 4)};
  fl.qx(3, 1) = 5.0;
  fl.qy(2, 3) = 7.0;
  EXPECT_EQ(divergence(fl).max_abs(), 0.0);
}

TEST(ScalarFlux, ForwardRegimeAboveThreshold) {
  auto nondecreasing = [](double delta, double gamma) {
    double prev = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 20000; ++k) {
      const double t = -50.0 + 100.0 * k / 20000.0;
      const double v = scalar_face_flux(t, delta, gamma, 1e-8);
      if (v < prev - 1e-12) return false;
      prev = v;
    }
    return true;
  };
  for (double gamma : {1.3, 1.5, 1.8, 2.0}) EXPECT_TRUE(nondecreasing(delta0(gamma) + 1e-6, gamma)) << gamma;
  EXPECT_FALSE(nondecreasing(0.28, 1.3));
}
