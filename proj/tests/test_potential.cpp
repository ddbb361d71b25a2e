#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"

using namespace fbfrac;

TEST(Phi, NormalizationAndDerivatives) {
  EXPECT_EQ(phi_profile(0.0, 1.33, 0.28), 0.0);
  for (double gamma : {1.3, 1.5, 2.0})
    for (double s : {0.5, 1.0, 2.0, 5.0}) {
      const double d = 0.28;
      const double hstep = 1e-5;
      const double fd = (phi_profile(s + hstep, gamma, d) - phi_profile(s - hstep, gamma, d)) / (2 * hstep);
      EXPECT_NEAR(fd, s / (1 + s * s) + d * std::pow(s, gamma - 1), 1e-6);
      EXPECT_NEAR(phi_profile_d1(s, gamma, d), s / (1 + s * s) + d * std::pow(s, gamma - 1), 1e-15);
      const double fd2 = (phi_profile_d1(s + hstep, gamma, d) - phi_profile_d1(s - hstep, gamma, d)) / (2 * hstep);
      EXPECT_NEAR(fd2, phi_profile_d2(s, gamma, d), 1e-6);
    }
}

TEST(Phi, PeronaMalikPartIsConcaveBeyondOne) {
  const double hs = 1e-3;
  const double second = phi_profile(2 + hs, 2.0, 0.0) - 2 * phi_profile(2, 2.0, 0.0) + phi_profile(2 - hs, 2.0, 0.0);
  EXPECT_LT(second, 0.0);
  EXPECT_NEAR(phi_profile(3.0, 2.0, 0.0), 0.5 * std::log(10.0), 1e-15);
}

TEST(QGamma, Examples) {
  const auto z = q_gamma({0.0, 0.0}, 1.3, 0.28);
  EXPECT_EQ(z[0], 0.0);
  EXPECT_EQ(z[1], 0.0);
  const auto q = q_gamma({1.0, 0.0}, 2.0, 0.125);
  EXPECT_DOUBLE_EQ(q[0], 0.625);
  EXPECT_EQ(q[1], 0.0);
}

TEST(QGamma, RotationEquivariance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-20, 20), a(0, 2 * std::numbers::pi);
  for (int k = 0; k < 1000; ++k) {
    const Vec2 th{d(rng), d(rng)};
    const double phi = a(rng), c = std::cos(phi), s = std::sin(phi);
    const Vec2 rt{c * th[0] - s * th[1], s * th[0] + c * th[1]};
    const auto q = q_gamma(th, 1.4, 0.3);
    const auto qr = q_gamma(rt, 1.4, 0.3);
    EXPECT_NEAR(qr[0], c * q[0] - s * q[1], 1e-12);
    EXPECT_NEAR(qr[1], s * q[0] + c * q[1], 1e-12);
  }
}

TEST(QGamma, GrowthBoundWitness) {
  for (double gamma : {1.2, 1.5, 2.0})
    for (double delta : {0.05, 0.28, 1.0}) {
      const double C = flux_growth_constant(delta);
      for (int k = 0; k <= 2000; ++k) {
        const double n = 1.0 + 0.05 * k;
        const auto q = q_gamma({n * 0.6, n * 0.8}, gamma, delta);
        EXPECT_LE(std::hypot(q[0], q[1]), C * std::pow(n, gamma - 1) * (1 + 1e-14));
      }
    }
}

TEST(Delta0, ClosedFormAtGammaTwo) {
  EXPECT_EQ(delta0(2.0), 0.125);
  EXPECT_THROW(delta0(1.0), ValidationError);
  EXPECT_THROW(delta0(2.5), ValidationError);
}

TEST(Delta0, DefaultDeltaIsForwardBackwardAtExperimentalGammas) {
  EXPECT_GT(delta0(1.28), 0.28);
  EXPECT_GT(delta0(1.38), 0.28);
  EXPECT_FALSE(convexify(1.28, 0.28).bridges().empty());
}

TEST(Delta0, MatchesSecondDerivativeSignChange) {
  // Phi'' has a double root at the threshold: min_s Phi''(s) = 0 at delta0.
  for (double gamma : {1.3, 1.6, 1.9}) {
    const double d0 = delta0(gamma);
    double mn = HUGE_VAL;
    for (int k = 1; k < 200000; ++k) mn = std::min(mn, phi_profile_d2(k * 1e-4, gamma, d0));
    EXPECT_NEAR(mn, 0.0, 1e-9) << gamma;
  }
}

TEST(Convexify, BracketsThreshold) {
  for (double gamma : {1.3, 1.6, 2.0}) {
    const double d0 = delta0(gamma);
    EXPECT_TRUE(convexify(gamma, d0 + 1e-3).bridges().empty()) << gamma;
    EXPECT_GE(convexify(gamma, d0 - 1e-3).bridges().size(), 1u) << gamma;
  }
}

TEST(Convexify, ConvexRegimeHasNoBridges) {
  const auto p = convexify(2.0, 0.2);
  EXPECT_TRUE(p.bridges().empty());
  for (std::size_t k = 0; k < p.n_samples(); ++k) EXPECT_NEAR(p.envelope()[k], p.phi()[k], 1e-9);
}

TEST(Convexify, SingleBridgeForWeakDelta) {
  const auto p = convexify(2.0, 0.05);
  ASSERT_EQ(p.bridges().size(), 1u);
  const auto& b = p.bridges()[0];
  EXPECT_GT(b.right - b.left, 0.0);
  // Tangent conditions of the refined bridge.
  EXPECT_NEAR(phi_profile_d1(b.left, 2.0, 0.05), b.slope, 1e-10);
  EXPECT_NEAR(phi_profile_d1(b.right, 2.0, 0.05), b.slope, 1e-10);
  // The inflection points of Phi lie inside the bridge.
  const double hi = std::sqrt(1.0 + 0.0);
  EXPECT_LT(b.left, hi);
  EXPECT_GT(b.right, hi);
}

TEST(Convexify, EnvelopeInvariants) {
  for (double gamma : {1.3, 1.6, 2.0})
    for (double delta : {0.02, 0.1, 0.28, delta0(gamma) - 1e-3}) {
      const auto p = convexify(gamma, delta, 400.0, 8192);
      const auto& e = p.envelope();
      const auto& ph = p.phi();
      const auto& de = p.envelope_slope();
      const auto& s = p.s();
      EXPECT_EQ(e[0], 0.0);
      const double lo = growth_lower_constant(gamma, delta), up = growth_upper_constant(gamma, delta);
      for (std::size_t k = 0; k < e.size(); ++k) {
        EXPECT_LE(e[k], ph[k] + 1e-12);
        if (!p.bridge_at(s[k])) {
          EXPECT_NEAR(e[k], ph[k], 1e-9);
        }
        EXPECT_LE(std::max(lo * std::pow(s[k], gamma) - 1.0, 0.0), e[k] + 1e-12);
        EXPECT_LE(e[k], up * std::pow(s[k], gamma) + 1.0);
        if (k > 0 && k + 1 < e.size()) {
          EXPECT_LE(e[k], 0.5 * (e[k - 1] + e[k + 1]) + 1e-9);
        }
        if (k > 0) {
          EXPECT_GE(de[k], de[k - 1] - 1e-12);
        }
      }
      for (const auto& b : p.bridges()) {
        const double mid = 0.5 * (b.left + b.right);
        EXPECT_LT(p.envelope_at(mid), phi_profile(mid, gamma, delta));
      }
    }
}

TEST(Convexify, Idempotent) {
  const auto p = convexify(1.3, 0.1);
  const auto again = lower_convex_envelope(p.s(), p.envelope());
  for (std::size_t k = 0; k < again.size(); ++k) EXPECT_NEAR(again[k], p.envelope()[k], 1e-12);
}

TEST(Convexify, BridgeCountNonincreasingInDelta) {
  std::size_t prev = 1000;
  for (double delta = 0.01; delta <= 0.36; delta += 0.01) {
    const std::size_t n = convexify(1.5, delta, 400.0, 8192).bridges().size();
    EXPECT_LE(n, prev);
    prev = n;
  }
  EXPECT_EQ(prev, 0u);
}

TEST(Convexify, Validation) {
  EXPECT_THROW(convexify(1.3, 0.28, 50.0, 100), ValidationError);
  EXPECT_THROW(convexify(1.3, 0.02, 1.5), ValidationError);
  EXPECT_THROW(convexify(0.9, 0.28), ValidationError);
  EXPECT_THROW(convexify(1.3, -0.1), ValidationError);
}

TEST(RhoGamma, MatchesFluxOffBridges) {
  const auto p = convexify(1.33, 0.28);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-30, 30);
  int checked = 0;
  for (int k = 0; k < 2000; ++k) {
    const Vec2 th{d(rng), d(rng)};
    const double n = std::hypot(th[0], th[1]);
    if (n > 50 || p.bridge_at(n)) continue;
    const auto r = rho_gamma(p, th);
    const auto q = q_gamma(th, 1.33, 0.28);
    EXPECT_NEAR(r[0], q[0], 2e-3);
    EXPECT_NEAR(r[1], q[1], 2e-3);
    ++checked;
  }
  EXPECT_GT(checked, 100);
  const auto z = rho_gamma(p, {0.0, 0.0});
  EXPECT_EQ(z[0], 0.0);
  EXPECT_EQ(z[1], 0.0);
  EXPECT_THROW(rho_gamma(p, {60.0, 0.0}), ValidationError);
}

TEST(RhoGamma, ConstantMagnitudeOnBridge) {
  const auto p = convexify(1.33, 0.28);
  ASSERT_FALSE(p.bridges().empty());
  const auto& b = p.bridges()[0];
  for (int k = 1; k < 20; ++k) {
    const double n = b.left + (b.right - b.left) * k / 20.0;
    const auto r = rho_gamma(p, {n * 0.28, n * 0.96});
    EXPECT_NEAR(std::hypot(r[0], r[1]), b.slope, 1e-9);
  }
}

TEST(RhoGamma, Monotone) {
  const auto p = convexify(1.3, 0.05, 200.0);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> d(0, 30), a(0, 2 * std::numbers::pi), sgn(-1, 1);
  for (int k = 0; k < 1000; ++k) {
    const double phi = a(rng);
    const Vec2 dir{std::cos(phi), std::sin(phi)};
    const double t1 = d(rng) * (sgn(rng) < 0 ? -1 : 1), t2 = d(rng);
    const Vec2 x{t1 * dir[0], t1 * dir[1]}, y{t2 * dir[0], t2 * dir[1]};
    const auto rx = rho_gamma(p, x), ry = rho_gamma(p, y);
    EXPECT_GE((rx[0] - ry[0]) * (x[0] - y[0]) + (rx[1] - ry[1]) * (x[1] - y[1]), -1e-9);
  }
  for (int k = 0; k < 1000; ++k) {
    const Vec2 x{sgn(rng) * 20, sgn(rng) * 20}, y{sgn(rng) * 20, sgn(rng) * 20};
    const auto rx = rho_gamma(p, x), ry = rho_gamma(p, y);
    EXPECT_GE((rx[0] - ry[0]) * (x[0] - y[0]) + (rx[1] - ry[1]) * (x[1] - y[1]), -1e-9);
  }
}

TEST(Profile, CsvDump) {
  const auto dir = fbtest::scratch_dir("pot_csv");
  const auto p = convexify(1.5, 0.1, 50.0, 256);
  p.write_csv(dir + "/p.csv");
  std::ifstream in(dir + "/p.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "s,phi,phi_star_star,rho");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 256);
}
