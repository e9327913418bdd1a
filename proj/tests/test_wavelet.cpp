#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "psense/wavelet.hpp"
#include "support.hpp"

using namespace psense;

namespace {

const char* kBases[] = {"haar", "db8", "sym8"};

}  // namespace

TEST(WaveletBasis, FiltersAreOrthonormalWithUnitDcGain) {
  for (const char* name : kBases) {
    const WaveletBasis b = WaveletBasis::from_name(name);
    EXPECT_LT(b.orthonormality_defect(), 1e-14) << name;
    double sum = 0;
    for (double h : b.lowpass()) sum += h;
    EXPECT_NEAR(sum, std::sqrt(2.0), 1e-14) << name;
    EXPECT_EQ(b.name(), name);
  }
}

TEST(WaveletBasis, EightTapFiltersHaveFourVanishingMoments) {
  for (const char* name : {"db8", "sym8"}) {
    const WaveletBasis basis = WaveletBasis::from_name(name);
    const auto& g = basis.highpass();
    ASSERT_EQ(g.size(), 8u);
    for (int k = 0; k < 4; ++k) {
      double moment = 0;
      for (std::size_t n = 0; n < g.size(); ++n) moment += g[n] * std::pow(double(n), k);
      EXPECT_NEAR(moment, 0.0, 1e-12) << name << " moment " << k;
    }
  }
}

TEST(WaveletBasis, UnknownNameIsConfigError) {
  EXPECT_THROW(WaveletBasis::from_name("coif3"), ConfigError);
  EXPECT_EQ(orientation_from_name("diagonal"), Orientation::diagonal);
  EXPECT_STREQ(orientation_name(Orientation::vertical), "vertical");
}

TEST(Dwt, HaarTwoByTwoByHand) {
  ComplexImaged img(2, 2);
  img << 1, 2, 3, 4;
  const auto z = dwt2(img, WaveletBasis::from_name("haar"), 1);
  EXPECT_NEAR(z.approximation()(0, 0).real(), 5.0, 1e-15);
  EXPECT_NEAR(z.detail(1, Orientation::vertical)(0, 0).real(), -1.0, 1e-15);
  EXPECT_NEAR(z.detail(1, Orientation::horizontal)(0, 0).real(), -2.0, 1e-15);
  EXPECT_NEAR(z.detail(1, Orientation::diagonal)(0, 0).real(), 0.0, 1e-15);
  EXPECT_NEAR(z.field()(0, 1).real(), -1.0, 1e-15);
  EXPECT_NEAR(z.field()(1, 0).real(), -2.0, 1e-15);
}

TEST(Dwt, ConstantImageHasOnlyApproximationEnergy) {
  const ComplexImaged img = ComplexImaged::Constant(16, 16, Complex<double>(2, -1));
  for (const char* name : kBases) {
    const auto z = dwt2(img, WaveletBasis::from_name(name), 2);
    for (int j = 1; j <= 2; ++j) {
      for (Orientation o : kOrientations) EXPECT_LT(z.detail(j, o).cwiseAbs().maxCoeff(), 1e-12) << name;
    }
    // Each level scales the DC value by 2.
    EXPECT_LT((z.approximation().array() - Complex<double>(8, -4)).abs().maxCoeff(), 1e-12) << name;
  }
}

TEST(Dwt, PerfectReconstructionAdjointAndParseval) {
  std::mt19937_64 rng(11);
  for (const char* name : kBases) {
    const WaveletBasis b = WaveletBasis::from_name(name);
    for (int levels = 1; levels <= 3; ++levels) {
      const ComplexImaged x = psense::testing::random_image(32, 16, rng);
      const auto zx = dwt2(x, b, levels);
      EXPECT_LT((idwt2(zx, b) - x).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_NEAR(zx.field().squaredNorm() / x.squaredNorm(), 1.0, 1e-12);
      const WaveletCoefficients<double> w(psense::testing::random_image(32, 16, rng), levels);
      const auto lhs = zx.field().cwiseProduct(w.field().conjugate()).sum();
      const auto rhs = x.cwiseProduct(idwt2(w, b).conjugate()).sum();
      EXPECT_LT(std::abs(lhs - rhs), 1e-10);
    }
  }
}

TEST(Dwt, FloatInstantiationReconstructs) {
  std::mt19937_64 rng(12);
  const ComplexImage<float> x = psense::testing::random_image(16, 16, rng).cast<Complex<float>>();
  const WaveletBasis b = WaveletBasis::from_name("sym8");
  EXPECT_LT((idwt2(dwt2(x, b, 2), b) - x).cwiseAbs().maxCoeff(), 1e-5f);
}

TEST(Dwt, ApproximationAtMatchesShallowerTransform) {
  std::mt19937_64 rng(13);
  const WaveletBasis b = WaveletBasis::from_name("db8");
  const ComplexImaged x = psense::testing::random_image(32, 32, rng);
  const auto deep = dwt2(x, b, 3);
  for (int j = 1; j <= 3; ++j) {
    const auto shallow = dwt2(x, b, j);
    EXPECT_LT((approximation_at(deep, b, j) - shallow.approximation()).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(approximation_at(deep, b, 4), DimensionError);
}

TEST(Dwt, LayoutErrors) {
  const WaveletBasis b = WaveletBasis::from_name("haar");
  EXPECT_THROW(dwt2(ComplexImaged::Zero(12, 16), b, 3), DimensionError);
  EXPECT_THROW(dwt2(ComplexImaged::Zero(16, 16), b, 0), DimensionError);
  EXPECT_THROW(WaveletCoefficients<double>(ComplexImaged::Zero(6, 8), 2), DimensionError);
  const auto z = WaveletCoefficients<double>::zeros(8, 8, 2);
  EXPECT_THROW(z.detail(3, Orientation::diagonal), DimensionError);
  EXPECT_EQ(z.detail(2, Orientation::horizontal).rows(), 2);
}
