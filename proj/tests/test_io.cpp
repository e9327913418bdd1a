#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "psense/io.hpp"
#include "support.hpp"

using namespace psense;
using psense::testing::ScratchDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace

TEST(Container, ImageRoundTripKeepsFloatPrecisionAndMetadata) {
  ScratchDir dir("io");
  std::mt19937_64 rng(3);
  const ComplexImaged img = psense::testing::random_image(5, 7, rng);
  write_image(dir / "img.hdr", img, {{"method", "sense"}, {"note", "two words"}});
  const Container back = read_container(dir / "img.hdr");
  ASSERT_EQ(back.planes.size(), 1u);
  EXPECT_EQ(back.meta.at("method"), "sense");
  EXPECT_EQ(back.meta.at("note"), "two words");
  const ComplexImaged& got = back.planes.front();
  ASSERT_EQ(got.rows(), 5);
  ASSERT_EQ(got.cols(), 7);
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    EXPECT_EQ(got.data()[i].real(), static_cast<double>(static_cast<float>(img.data()[i].real())));
    EXPECT_EQ(got.data()[i].imag(), static_cast<double>(static_cast<float>(img.data()[i].imag())));
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "img.raw"));
  EXPECT_EQ(std::filesystem::file_size(dir / "img.raw"), 5u * 7u * 8u);
}

TEST(Container, HeaderLayout) {
  ScratchDir dir("io");
  write_image(dir / "a.hdr", ComplexImaged::Zero(2, 3));
  const std::string text = slurp(dir / "a.hdr");
  EXPECT_EQ(text.rfind("PSNS1\n", 0), 0u);
  EXPECT_NE(text.find("dims 1 2 3\n"), std::string::npos);
  EXPECT_NE(text.find("dtype complex64\n"), std::string::npos);
  EXPECT_NE(text.find("data a.raw\n"), std::string::npos);
}

TEST(Container, RawIsInterleavedRowMajor) {
  ScratchDir dir("io");
  ComplexImaged img(2, 2);
  img << Complex<double>(1, 2), Complex<double>(3, 4), Complex<double>(5, 6), Complex<double>(7, 8);
  write_image(dir / "b.hdr", img);
  const std::string raw = slurp(dir / "b.raw");
  ASSERT_EQ(raw.size(), 32u);
  float values[8];
  std::memcpy(values, raw.data(), sizeof(values));
  for (int k = 0; k < 8; ++k) EXPECT_EQ(values[k], float(k + 1));
}

TEST(Container, BadMagicIsIoError) {
  ScratchDir dir("io");
  write_image(dir / "c.hdr", ComplexImaged::Zero(2, 2));
  spit(dir / "c.hdr", "PSNS2\ndims 1 2 2\ndtype complex64\ndata c.raw\n");
  EXPECT_THROW(read_image(dir / "c.hdr"), IoError);
}

TEST(Container, ByteCountMismatchIsIoError) {
  ScratchDir dir("io");
  write_image(dir / "d.hdr", ComplexImaged::Zero(2, 2));
  spit(dir / "d.hdr", "PSNS1\ndims 1 3 2\ndtype complex64\ndata d.raw\n");
  try {
    read_image(dir / "d.hdr");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("byte-count mismatch"), std::string::npos);
  }
}

TEST(Container, UnknownFieldAndMissingFilesAreIoErrors) {
  ScratchDir dir("io");
  write_image(dir / "e.hdr", ComplexImaged::Zero(2, 2));
  spit(dir / "e.hdr", "PSNS1\ndims 1 2 2\ndtype complex64\ndata e.raw\ncolour blue\n");
  EXPECT_THROW(read_image(dir / "e.hdr"), IoError);
  spit(dir / "e.hdr", "PSNS1\ndims 1 2 2\ndtype complex128\ndata e.raw\n");
  EXPECT_THROW(read_image(dir / "e.hdr"), IoError);
  EXPECT_THROW(read_image(dir / "missing.hdr"), IoError);
  std::filesystem::remove(dir / "e.raw");
  spit(dir / "e.hdr", "PSNS1\ndims 1 2 2\ndtype complex64\ndata e.raw\n");
  EXPECT_THROW(read_image(dir / "e.hdr"), IoError);
}

TEST(Container, MultiPlaneFileIsNotASingleImage) {
  ScratchDir dir("io");
  write_container(dir / "f.hdr", Container{{ComplexImaged::Zero(2, 2), ComplexImaged::Zero(2, 2)}, {}});
  EXPECT_THROW(read_image(dir / "f.hdr"), IoError);
  EXPECT_EQ(read_container(dir / "f.hdr").planes.size(), 2u);
}

TEST(CoilData, RoundTripKeepsReduction) {
  ScratchDir dir("io");
  std::mt19937_64 rng(4);
  MultiCoilData<double> d;
  d.reduction = 2;
  for (int l = 0; l < 3; ++l) d.coils.push_back(psense::testing::random_image(4, 6, rng));
  write_coil_data(dir / "data.hdr", d);
  const MultiCoilData<double> back = read_coil_data(dir / "data.hdr");
  EXPECT_EQ(back.reduction, 2);
  EXPECT_EQ(back.coil_count(), 3);
  EXPECT_EQ(back.full_height(), 8);
  EXPECT_LT((back.coils[2] - d.coils[2]).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(CoilData, ValidationRejectsTooFewCoils) {
  MultiCoilData<double> d;
  d.reduction = 4;
  d.coils.assign(2, ComplexImaged::Zero(2, 2));
  EXPECT_THROW(d.validate(), DimensionError);
  d.reduction = 2;
  d.coils[1] = ComplexImaged::Zero(3, 2);
  EXPECT_THROW(d.validate(), DimensionError);
}

TEST(Covariance, RoundTripKeepsSigmaAndHermitianSymmetry) {
  ScratchDir dir("io");
  NoiseCovariance<double> cov;
  cov.psi.resize(2, 2);
  cov.psi << 2.0, Complex<double>(0.5, 0.25), Complex<double>(0.5, -0.25), 1.0;
  cov.sigma_n = 0.1234567890123;
  write_covariance(dir / "noise.hdr", cov);
  const NoiseCovariance<double> back = read_covariance(dir / "noise.hdr");
  EXPECT_EQ(back.sigma_n, cov.sigma_n);
  EXPECT_EQ((back.psi - back.psi.adjoint()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT((back.psi - cov.psi).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_NO_THROW(back.validate());
}

TEST(Covariance, ValidationRejectsNonHermitianAndIndefinite) {
  NoiseCovariance<double> cov;
  cov.psi.resize(2, 2);
  cov.psi << 1.0, 0.5, 0.4, 1.0;
  EXPECT_THROW(cov.validate(), NumericalError);
  cov.psi << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(cov.validate(), NumericalError);
  cov.psi.resize(2, 3);
  EXPECT_THROW(cov.validate(), DimensionError);
}

TEST(Magnitude, RoundsHalfAwayFromZero) {
  ComplexImaged img(1, 4);
  img << 255.0, Complex<double>(0, 127.5), 0.4, -0.6;
  const auto px = magnitude_pixels(img);
  ASSERT_EQ(px.size(), 4u);
  EXPECT_EQ(px[0], 255);
  EXPECT_EQ(px[1], 128);
  EXPECT_EQ(px[2], 0);
  EXPECT_EQ(px[3], 1);
}

TEST(Magnitude, AllZeroImageMapsToBlack) {
  const auto px = magnitude_pixels(ComplexImaged::Zero(3, 3));
  for (auto p : px) EXPECT_EQ(p, 0);
}

TEST(Magnitude, PgmHeaderAndPayload) {
  ScratchDir dir("io");
  ComplexImaged img(2, 3);
  img << 1, 2, 3, 4, 5, Complex<double>(3, 4);
  export_magnitude(img, dir / "m.pgm");
  const std::string text = slurp(dir / "m.pgm");
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(text.size(), header.size() + 6);
  EXPECT_EQ(text.substr(0, header.size()), header);
  EXPECT_EQ(static_cast<unsigned char>(text[header.size()]), 51);
  EXPECT_EQ(static_cast<unsigned char>(text.back()), 255);
}

TEST(Helpers, RealInnerProductTreatsComplexAsPairs) {
  ComplexImaged a(1, 2), b(1, 2);
  a << Complex<double>(1, 2), Complex<double>(3, -1);
  b << Complex<double>(4, 5), Complex<double>(-2, 6);
  EXPECT_DOUBLE_EQ(real_inner(a, b), 1 * 4 + 2 * 5 + 3 * -2 + -1 * 6);
  EXPECT_THROW(require_same_shape(a, ComplexImaged(2, 1), "t"), DimensionError);
  EXPECT_THROW(require_nonempty(ComplexImaged(0, 0), "t"), DimensionError);
}
