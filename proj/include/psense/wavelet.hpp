#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "psense/core.hpp"

namespace psense {

enum class WaveletFamily { haar, db8, sym8 };

/// Orthonormal two-channel filter bank. The high-pass taps follow the
/// quadrature-mirror relation g[n] = (-1)^n h[N-1-n].
class WaveletBasis {
 public:
  static WaveletBasis make(WaveletFamily family);
  /// Accepts "haar", "db8", "sym8".
  static WaveletBasis from_name(std::string_view name);

  WaveletFamily family() const { return family_; }
  const std::string& name() const { return name_; }
  const std::vector<double>& lowpass() const { return lowpass_; }
  const std::vector<double>& highpass() const { return highpass_; }

  /// Largest deviation from sum h^2 = 1 and sum h[k]h[k+2m] = 0 (m != 0).
  double orthonormality_defect() const;

 private:
  WaveletBasis(WaveletFamily family, std::string name, std::vector<double> lowpass);

  WaveletFamily family_;
  std::string name_;
  std::vector<double> lowpass_;
  std::vector<double> highpass_;
};

enum class Orientation { horizontal = 0, vertical = 1, diagonal = 2 };

inline constexpr std::array<Orientation, 3> kOrientations = {Orientation::horizontal, Orientation::vertical,
                                                            Orientation::diagonal};

const char* orientation_name(Orientation o);
Orientation orientation_from_name(std::string_view name);

/// Coefficient field zeta in the usual pyramid layout inside a Y x X array.
///
/// Level j (1 = finest) occupies the (Y/2^{j-1}) x (X/2^{j-1}) top-left region
/// and splits it into quadrants of size (Y/2^j) x (X/2^j):
///
///   +-------------+-------------+
///   | approx / j+1|  vertical   |      vertical:   high-pass along x
///   +-------------+-------------+      horizontal: high-pass along y
///   | horizontal  |  diagonal   |      diagonal:   high-pass along both
///   +-------------+-------------+
///
/// The approximation block of level j_max sits in the top-left corner.
template <typename Scalar>
class WaveletCoefficients {
 public:
  using Field = ComplexImage<Scalar>;

  WaveletCoefficients() = default;
  WaveletCoefficients(Field field, int levels) : field_(std::move(field)), levels_(levels) { validate(); }

  static WaveletCoefficients zeros(Eigen::Index height, Eigen::Index width, int levels) {
    return WaveletCoefficients(Field::Zero(height, width), levels);
  }

  int levels() const { return levels_; }
  Eigen::Index height() const { return field_.rows(); }
  Eigen::Index width() const { return field_.cols(); }
  Eigen::Index size() const { return field_.size(); }

  Field& field() { return field_; }
  const Field& field() const { return field_; }

  Eigen::Index block_rows(int level) const { return field_.rows() >> level; }
  Eigen::Index block_cols(int level) const { return field_.cols() >> level; }

  auto approximation() { return field_.topLeftCorner(block_rows(levels_), block_cols(levels_)); }
  auto approximation() const { return field_.topLeftCorner(block_rows(levels_), block_cols(levels_)); }

  auto detail(int level, Orientation o) {
    const auto [r, c] = detail_origin(level, o);
    return field_.block(r, c, block_rows(level), block_cols(level));
  }
  auto detail(int level, Orientation o) const {
    const auto [r, c] = detail_origin(level, o);
    return field_.block(r, c, block_rows(level), block_cols(level));
  }

  bool same_layout(const WaveletCoefficients& other) const {
    return levels_ == other.levels_ && field_.rows() == other.field_.rows() && field_.cols() == other.field_.cols();
  }

  void validate() const {
    if (levels_ < 1) throw DimensionError("wavelet coefficients: levels must be >= 1");
    require_nonempty(field_, "wavelet coefficients");
    const Eigen::Index m = Eigen::Index(1) << levels_;
    if (field_.rows() % m != 0 || field_.cols() % m != 0) {
      throw DimensionError("wavelet coefficients: " + std::to_string(field_.rows()) + "x" +
                           std::to_string(field_.cols()) + " is not divisible by 2^" + std::to_string(levels_));
    }
  }

 private:
  std::pair<Eigen::Index, Eigen::Index> detail_origin(int level, Orientation o) const {
    if (level < 1 || level > levels_) throw DimensionError("wavelet coefficients: level out of range");
    const Eigen::Index r = block_rows(level);
    const Eigen::Index c = block_cols(level);
    switch (o) {
      case Orientation::vertical: return {0, c};
      case Orientation::horizontal: return {r, 0};
      case Orientation::diagonal: return {r, c};
    }
    return {0, 0};
  }

  Field field_;
  int levels_ = 0;
};

namespace detail {

// One periodic analysis step on n samples read with the given stride:
//   low[k]  = sum_i h[i] x[(2k+i) mod n],  high[k] = sum_i g[i] x[(2k+i) mod n].
// Outputs are written low half first. Summation order is fixed.
template <typename Scalar>
void analyze_1d(const Complex<Scalar>* in, Complex<Scalar>* out, Eigen::Index n, const std::vector<double>& h,
                const std::vector<double>& g) {
  const Eigen::Index half = n / 2;
  const auto taps = static_cast<Eigen::Index>(h.size());
  for (Eigen::Index k = 0; k < half; ++k) {
    Complex<Scalar> lo(0), hi(0);
    for (Eigen::Index i = 0; i < taps; ++i) {
      const Complex<Scalar>& v = in[(2 * k + i) % n];
      lo += static_cast<Scalar>(h[static_cast<std::size_t>(i)]) * v;
      hi += static_cast<Scalar>(g[static_cast<std::size_t>(i)]) * v;
    }
    out[k] = lo;
    out[half + k] = hi;
  }
}

// Exact adjoint of analyze_1d.
template <typename Scalar>
void synthesize_1d(const Complex<Scalar>* in, Complex<Scalar>* out, Eigen::Index n, const std::vector<double>& h,
                   const std::vector<double>& g) {
  const Eigen::Index half = n / 2;
  const auto taps = static_cast<Eigen::Index>(h.size());
  for (Eigen::Index m = 0; m < n; ++m) out[m] = Complex<Scalar>(0);
  for (Eigen::Index k = 0; k < half; ++k) {
    const Complex<Scalar>& lo = in[k];
    const Complex<Scalar>& hi = in[half + k];
    for (Eigen::Index i = 0; i < taps; ++i) {
      out[(2 * k + i) % n] += static_cast<Scalar>(h[static_cast<std::size_t>(i)]) * lo +
                              static_cast<Scalar>(g[static_cast<std::size_t>(i)]) * hi;
    }
  }
}

// Transform the top-left rows x cols region of `field` in place, one level.
template <typename Scalar, bool Forward>
void transform_region(ComplexImage<Scalar>& field, Eigen::Index rows, Eigen::Index cols, const WaveletBasis& basis) {
  const auto& h = basis.lowpass();
  const auto& g = basis.highpass();
  std::vector<Complex<Scalar>> src(static_cast<std::size_t>(std::max(rows, cols)));
  std::vector<Complex<Scalar>> dst(src.size());

  auto pass_rows = [&] {
    for (Eigen::Index y = 0; y < rows; ++y) {
      for (Eigen::Index x = 0; x < cols; ++x) src[static_cast<std::size_t>(x)] = field(y, x);
      if constexpr (Forward) {
        analyze_1d<Scalar>(src.data(), dst.data(), cols, h, g);
      } else {
        synthesize_1d<Scalar>(src.data(), dst.data(), cols, h, g);
      }
      for (Eigen::Index x = 0; x < cols; ++x) field(y, x) = dst[static_cast<std::size_t>(x)];
    }
  };
  auto pass_cols = [&] {
    for (Eigen::Index x = 0; x < cols; ++x) {
      for (Eigen::Index y = 0; y < rows; ++y) src[static_cast<std::size_t>(y)] = field(y, x);
      if constexpr (Forward) {
        analyze_1d<Scalar>(src.data(), dst.data(), rows, h, g);
      } else {
        synthesize_1d<Scalar>(src.data(), dst.data(), rows, h, g);
      }
      for (Eigen::Index y = 0; y < rows; ++y) field(y, x) = dst[static_cast<std::size_t>(y)];
    }
  };

  if constexpr (Forward) {
    pass_rows();
    pass_cols();
  } else {
    pass_cols();
    pass_rows();
  }
}

inline void check_levels(Eigen::Index rows, Eigen::Index cols, int levels) {
  if (levels < 1) throw DimensionError("wavelet transform: j_max must be >= 1");
  if (levels > 30) throw DimensionError("wavelet transform: j_max too large");
  const Eigen::Index m = Eigen::Index(1) << levels;
  if (rows % m != 0 || cols % m != 0) {
    throw DimensionError("wavelet transform: image " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " is not divisible by 2^" + std::to_string(levels));
  }
}

}  // namespace detail

/// Orthonormal separable periodic decomposition T over `levels` dyadic levels.
template <typename Derived>
auto dwt2(const Eigen::MatrixBase<Derived>& image, const WaveletBasis& basis, int levels) {
  using Scalar = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  require_nonempty(image, "dwt2");
  detail::check_levels(image.rows(), image.cols(), levels);
  ComplexImage<Scalar> field = image;
  for (int j = 0; j < levels; ++j) {
    detail::transform_region<Scalar, true>(field, image.rows() >> j, image.cols() >> j, basis);
  }
  return WaveletCoefficients<Scalar>(std::move(field), levels);
}

/// Reconstruction T*, the adjoint (and inverse) of dwt2.
template <typename Scalar>
ComplexImage<Scalar> idwt2(const WaveletCoefficients<Scalar>& coeffs, const WaveletBasis& basis) {
  coeffs.validate();
  ComplexImage<Scalar> field = coeffs.field();
  for (int j = coeffs.levels() - 1; j >= 0; --j) {
    detail::transform_region<Scalar, false>(field, coeffs.height() >> j, coeffs.width() >> j, basis);
  }
  return field;
}

/// Approximation block at an intermediate level (1..levels), obtained by
/// partially synthesizing the coarser subbands.
template <typename Scalar>
ComplexImage<Scalar> approximation_at(const WaveletCoefficients<Scalar>& coeffs, const WaveletBasis& basis,
                                      int level) {
  if (level < 1 || level > coeffs.levels()) throw DimensionError("approximation_at: level out of range");
  ComplexImage<Scalar> field = coeffs.field();
  for (int j = coeffs.levels() - 1; j >= level; --j) {
    detail::transform_region<Scalar, false>(field, coeffs.height() >> j, coeffs.width() >> j, basis);
  }
  return field.topLeftCorner(coeffs.height() >> level, coeffs.width() >> level);
}

}  // namespace psense
