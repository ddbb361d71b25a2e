#include <gtest/gtest.h>

#include "oracles.hpp"
#include "support.hpp"

using namespace fbfrac;

namespace {

void expect_valid_kernel(const BlurKernel& k) {
  EXPECT_EQ(k.kh % 2, 1u);
  EXPECT_EQ(k.kw % 2, 1u);
  EXPECT_EQ(k.weights.size(), k.kh * k.kw);
  EXPECT_NEAR(k.sum(), 1.0, 1e-12);
  for (double v : k.weights) EXPECT_GE(v, 0.0);
}

double kernel_inner_gap(const BlurKernel& k, std::uint64_t seed) {
  const auto u = fbtest::random_image(32, 32, seed, -1, 1);
  const auto v = fbtest::random_image(32, 32, seed + 1000, -1, 1);
  const double lhs = inner(apply_blur(k, u), v), rhs = inner(u, apply_adjoint(k, v));
  return std::abs(lhs - rhs) / (l2_norm(u) * l2_norm(v));
}

}  // namespace

TEST(AverageKernel, Examples) {
  const auto k5 = make_average_kernel(5);
  expect_valid_kernel(k5);
  EXPECT_EQ(k5.weights.size(), 25u);
  for (double v : k5.weights) EXPECT_DOUBLE_EQ(v, 0.04);
  const auto k1 = make_average_kernel(1);
  EXPECT_EQ(k1.kh, 1u);
  EXPECT_EQ(k1.weights[0], 1.0);
  const auto k3 = make_average_kernel(3);
  for (double v : k3.weights) EXPECT_DOUBLE_EQ(v, 1.0 / 9.0);
  EXPECT_NEAR(k3.sum(), 1.0, 1e-15);
  EXPECT_THROW(make_average_kernel(4), ValidationError);
  EXPECT_THROW(make_average_kernel(0), ValidationError);
}

TEST(DiskKernel, RadiusThreeGeometry) {
  const auto k = make_disk_kernel(3.0);
  expect_valid_kernel(k);
  EXPECT_EQ(k.kh, 7u);
  EXPECT_EQ(k.kw, 7u);
  EXPECT_EQ(k.at(0, 0), k.at(1, 1));
  EXPECT_EQ(k.at(3, 3), 0.0);
  EXPECT_EQ(k.at(-3, 3), 0.0);
  for (int a = -3; a <= 3; ++a)
    for (int b = -3; b <= 3; ++b) {
      EXPECT_EQ(k.at(a, b), k.at(-a, b));
      EXPECT_EQ(k.at(a, b), k.at(b, a));
    }
}

TEST(DiskKernel, TinyRadiusIsAnchorOnly) {
  const auto k = make_disk_kernel(0.5);
  EXPECT_EQ(k.kh, 3u);
  EXPECT_EQ(k.at(0, 0), 1.0);
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b) {
      if (a || b) {
        EXPECT_EQ(k.at(a, b), 0.0);
      }
    }
}

TEST(DiskKernel, MatchesFineCoverageOracle) {
  const auto k = make_disk_kernel(3.0);
  const int fine = 256;
  std::vector<double> area(49, 0.0);
  double total = 0.0;
  for (int a = -3; a <= 3; ++a)
    for (int b = -3; b <= 3; ++b) {
      long in = 0;
      for (int u = 0; u < fine; ++u)
        for (int v = 0; v < fine; ++v) {
          const double y = a - 0.5 + (u + 0.5) / fine, x = b - 0.5 + (v + 0.5) / fine;
          in += x * x + y * y <= 9.0;
        }
      area[static_cast<std::size_t>((a + 3) * 7 + b + 3)] = static_cast<double>(in);
      total += static_cast<double>(in);
    }
  for (int a = -3; a <= 3; ++a)
    for (int b = -3; b <= 3; ++b)
      EXPECT_NEAR(k.at(a, b), area[static_cast<std::size_t>((a + 3) * 7 + b + 3)] / total, 1e-3);
}

TEST(MotionKernel, AxisAligned) {
  const auto k = make_motion_kernel(3.0, 0.0);
  expect_valid_kernel(k);
  ASSERT_EQ(k.kh, 1u);
  ASSERT_EQ(k.kw, 3u);
  for (double v : k.weights) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(MotionKernel, LengthTwentyExtent) {
  const auto k = make_motion_kernel(20.0, std::numbers::pi / 3.0);
  expect_valid_kernel(k);
  EXPECT_LE(k.kh, 19u);
  EXPECT_LE(k.kw, 13u);
  EXPECT_GE(k.kh, 17u);
  EXPECT_GE(k.kw, 9u);
  // Centrosymmetric segment through the anchor.
  for (int a = -k.half_h(); a <= k.half_h(); ++a)
    for (int b = -k.half_w(); b <= k.half_w(); ++b) EXPECT_NEAR(k.at(a, b), k.at(-a, -b), 1e-15);
  EXPECT_GT(k.at(0, 0), 0.0);
}

TEST(MotionKernel, ReflectionSymmetry) {
  for (double L : {3.0, 7.5, 20.0})
    for (double th : {0.1, 0.4, std::numbers::pi / 3.0, 1.2}) {
      const auto a = make_motion_kernel(L, th);
      const auto b = make_motion_kernel(L, std::numbers::pi / 2.0 - th);
      ASSERT_EQ(a.kh, b.kw);
      ASSERT_EQ(a.kw, b.kh);
      // Transpose of b with the column axis flipped maps direction (pi/2 - th) onto th.
      for (int i = -a.half_h(); i <= a.half_h(); ++i)
        for (int j = -a.half_w(); j <= a.half_w(); ++j) EXPECT_NEAR(a.at(i, j), b.at(-j, -i), 1e-10) << L << " " << th;
    }
}

TEST(MotionKernel, RejectsShortLength) { EXPECT_THROW(make_motion_kernel(0.5, 0.0), ValidationError); }

TEST(ApplyBlur, ConstantAndIdentity) {
  const ImageGrid c(20, 20, 77.0);
  for (const auto& k : {make_disk_kernel(3), make_average_kernel(5), make_motion_kernel(20, std::numbers::pi / 3)}) {
    const auto out = apply_blur(k, c);
    EXPECT_LT(fbtest::max_abs_diff(out, c), 1e-12);
  }
  const auto u = fbtest::random_image(9, 9, 1);
  EXPECT_EQ(apply_blur(make_identity_kernel(), u), u);
  EXPECT_EQ(apply_adjoint(make_identity_kernel(), u), u);
}

TEST(ApplyBlur, MatchesPaddedLoopOracle) {
  const auto u = fbtest::random_image(16, 16, 3);
  const auto k = make_average_kernel(3);
  EXPECT_LT(fbtest::max_abs_diff(apply_blur(k, u), fbtest::oracle_blur(k.weights, 3, 3, u)), 1e-12);
  const auto m = make_motion_kernel(7, 0.7);
  const auto u2 = fbtest::random_image(20, 18, 4);
  EXPECT_LT(fbtest::max_abs_diff(apply_blur(m, u2),
                                 fbtest::oracle_blur(m.weights, static_cast<long>(m.kh), static_cast<long>(m.kw), u2)),
            1e-12);
}

TEST(ApplyBlur, ConvexCombinationRange) {
  const auto u = fbtest::random_image(32, 32, 8);
  const auto out = apply_blur(make_disk_kernel(3), u);
  EXPECT_GE(out.min(), 0.0);
  EXPECT_LE(out.max(), 255.0);
}

TEST(ApplyBlur, KernelLargerThanImage) {
  EXPECT_THROW(apply_blur(make_average_kernel(5), ImageGrid(4, 8)), ValidationError);
  EXPECT_THROW(apply_adjoint(make_average_kernel(5), ImageGrid(8, 4)), ValidationError);
}

TEST(Adjoint, MatchesMatrixTranspose) {
  for (const auto& k : {make_average_kernel(3), make_motion_kernel(5, 0.9), make_disk_kernel(1.5)}) {
    const long R = 7, C = 6;
    const auto M = fbtest::oracle_blur_matrix(k.weights, static_cast<long>(k.kh), static_cast<long>(k.kw), R, C);
    const auto v = fbtest::random_image(R, C, 12);
    const auto adj = apply_adjoint(k, v);
    for (long q = 0; q < R * C; ++q) {
      double acc = 0.0;
      for (long p = 0; p < R * C; ++p) acc += M[static_cast<std::size_t>(p * R * C + q)] * v.values()[static_cast<std::size_t>(p)];
      EXPECT_NEAR(adj.values()[static_cast<std::size_t>(q)], acc, 1e-12);
    }
  }
}

TEST(Adjoint, InnerProductIdentity) {
  for (const auto& k : {make_disk_kernel(3), make_average_kernel(5), make_motion_kernel(20, std::numbers::pi / 3)})
    for (std::uint64_t seed = 0; seed < 10; ++seed) EXPECT_LE(kernel_inner_gap(k, seed), 1e-10);
}

TEST(Adjoint, SelfAdjointAwayFromBoundary) {
  const auto k = make_disk_kernel(3);
  ImageGrid v(24, 24);
  std::mt19937_64 rng(2);
  for (std::size_t i = 6; i < 18; ++i)
    for (std::size_t j = 6; j < 18; ++j) v(i, j) = std::uniform_real_distribution<double>(0, 1)(rng);
  const auto a = apply_adjoint(k, v), b = apply_blur(k, v);
  for (std::size_t i = 3; i < 21; ++i)
    for (std::size_t j = 3; j < 21; ++j) EXPECT_NEAR(a(i, j), b(i, j), 1e-14);
}

TEST(Degrade, NoiseFreeIdentity) {
  const auto u = fbtest::random_image(10, 10, 1);
  EXPECT_EQ(degrade(u, DegradationSpec{make_identity_kernel(), 0.0, 5}), u);
  EXPECT_THROW(degrade(u, DegradationSpec{make_identity_kernel(), -1.0, 5}), ValidationError);
}

TEST(Degrade, NoiseStatisticsAndDeterminism) {
  const auto u = fbtest::random_image(256, 256, 2);
  const DegradationSpec spec{make_disk_kernel(3), 3.0, 12345};
  const auto f = degrade(u, spec);
  const auto blurred = apply_blur(spec.kernel, u);
  double m = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double d = f.values()[k] - blurred.values()[k];
    m += d;
    m2 += d * d;
  }
  const double n = static_cast<double>(f.size());
  const double sd = std::sqrt(m2 / n - (m / n) * (m / n));
  EXPECT_GE(sd, 2.8);
  EXPECT_LE(sd, 3.2);
  EXPECT_NEAR(m / n, 0.0, 0.05);
  EXPECT_EQ(degrade(u, spec), f);
  DegradationSpec other = spec;
  other.seed = 12346;
  EXPECT_NE(degrade(u, other), f);
}

TEST(Degrade, NoiseFileRoundTrip) {
  const auto dir = fbtest::scratch_dir("blur_noise");
  std::vector<double> noise(64);
  const CounterGaussian g(9);
  for (std::size_t k = 0; k < noise.size(); ++k) noise[k] = 3.0 * g.normal(k);
  save_noise_file(dir + "/n.bin", noise);
  EXPECT_EQ(load_noise_file(dir + "/n.bin", 8, 8), noise);
  EXPECT_THROW(load_noise_file(dir + "/n.bin", 8, 9), IoError);
  const auto u = fbtest::random_image(8, 8, 3);
  const DegradationSpec spec{make_average_kernel(3), 3.0, 9};
  EXPECT_EQ(degrade(u, spec, &noise), degrade(u, spec));
}

TEST(CounterGaussian, MomentsAndCounterIndependence) {
  const CounterGaussian g(42);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double x = g.normal(static_cast<std::uint64_t>(k));
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
  EXPECT_EQ(g.normal(1234), CounterGaussian(42).normal(1234));
}
