#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <vector>

#include "psense/core.hpp"
#include "psense/wavelet.hpp"

namespace psense {

/// Per-pixel boxes C_r = [lo_re, hi_re] x i[lo_im, hi_im]. Unconstrained pixels carry
/// infinite bounds in both channels and are off in `active`.
template <typename Scalar>
struct ConstraintSet {
  RealImage<Scalar> lo_re, hi_re, lo_im, hi_im;
  Mask active;

  static ConstraintSet unconstrained(Eigen::Index height, Eigen::Index width) {
    const Scalar inf = std::numeric_limits<Scalar>::infinity();
    ConstraintSet c;
    c.lo_re = RealImage<Scalar>::Constant(height, width, -inf);
    c.hi_re = RealImage<Scalar>::Constant(height, width, inf);
    c.lo_im = c.lo_re;
    c.hi_im = c.hi_re;
    c.active = Mask::Constant(height, width, false);
    return c;
  }

  /// Every pixel pinned to `image` exactly.
  template <typename Derived>
  static ConstraintSet pinned(const Eigen::MatrixBase<Derived>& image) {
    ConstraintSet c;
    c.lo_re = image.real();
    c.hi_re = c.lo_re;
    c.lo_im = image.imag();
    c.hi_im = c.lo_im;
    c.active = Mask::Constant(image.rows(), image.cols(), true);
    return c;
  }

  Eigen::Index height() const { return lo_re.rows(); }
  Eigen::Index width() const { return lo_re.cols(); }

  void validate() const {
    require_nonempty(lo_re, "constraint set");
    require_same_shape(lo_re, hi_re, "constraint set");
    require_same_shape(lo_re, lo_im, "constraint set");
    require_same_shape(lo_re, hi_im, "constraint set");
    require_same_shape(lo_re, active, "constraint set");
    for (Eigen::Index y = 0; y < height(); ++y) {
      for (Eigen::Index x = 0; x < width(); ++x) {
        if (!(lo_re(y, x) <= hi_re(y, x)) || !(lo_im(y, x) <= hi_im(y, x))) {
          throw ConfigError("constraint set is empty at pixel (" + std::to_string(y) + ", " + std::to_string(x) +
                            "): lower bound exceeds upper bound");
        }
      }
    }
  }
};

template <typename Scalar, typename Derived>
bool is_feasible(const Eigen::MatrixBase<Derived>& image, const ConstraintSet<Scalar>& c) {
  require_same_shape(image, c.lo_re, "is_feasible");
  for (Eigen::Index y = 0; y < image.rows(); ++y) {
    for (Eigen::Index x = 0; x < image.cols(); ++x) {
      const auto v = image(y, x);
      if (v.real() < c.lo_re(y, x) || v.real() > c.hi_re(y, x) || v.imag() < c.lo_im(y, x) || v.imag() > c.hi_im(y, x)) {
        return false;
      }
    }
  }
  return true;
}

/// Largest distance from any channel value to its interval (0 when feasible).
template <typename Scalar, typename Derived>
Scalar max_violation(const Eigen::MatrixBase<Derived>& image, const ConstraintSet<Scalar>& c) {
  require_same_shape(image, c.lo_re, "max_violation");
  Scalar worst = 0;
  for (Eigen::Index y = 0; y < image.rows(); ++y) {
    for (Eigen::Index x = 0; x < image.cols(); ++x) {
      const auto v = image(y, x);
      worst = std::max({worst, c.lo_re(y, x) - v.real(), v.real() - c.hi_re(y, x), c.lo_im(y, x) - v.imag(),
                        v.imag() - c.hi_im(y, x)});
    }
  }
  return worst;
}

/// Channelwise clamp, the Euclidean projection onto C.
template <typename Scalar, typename Derived>
ComplexImage<Scalar> project_C(const Eigen::MatrixBase<Derived>& image, const ConstraintSet<Scalar>& c) {
  require_same_shape(image, c.lo_re, "project_C");
  ComplexImage<Scalar> out(image.rows(), image.cols());
  for (Eigen::Index y = 0; y < image.rows(); ++y) {
    for (Eigen::Index x = 0; x < image.cols(); ++x) {
      const auto v = image(y, x);
      out(y, x) = {std::clamp(v.real(), c.lo_re(y, x), c.hi_re(y, x)), std::clamp(v.imag(), c.lo_im(y, x), c.hi_im(y, x))};
    }
  }
  return out;
}

/// P_{C*}(zeta) = T P_C(T* zeta); a projection because T is orthonormal.
template <typename Scalar>
WaveletCoefficients<Scalar> project_Cstar(const WaveletCoefficients<Scalar>& zeta, const ConstraintSet<Scalar>& c,
                                          const WaveletBasis& basis) {
  return dwt2(project_C(idwt2(zeta, basis), c), basis, zeta.levels());
}

// Flat morphology with a (2r+1)^2 square and replicate borders.
namespace detail {

template <typename Scalar, bool Max>
RealImage<Scalar> rank_filter(const RealImage<Scalar>& in, int radius) {
  const Eigen::Index rows = in.rows();
  const Eigen::Index cols = in.cols();
  auto pick = [](Scalar a, Scalar b) { return Max ? std::max(a, b) : std::min(a, b); };
  // Separable: the square window is the product of two 1D windows.
  RealImage<Scalar> tmp(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      Scalar v = in(y, x);
      for (int k = -radius; k <= radius; ++k) v = pick(v, in(y, std::clamp<Eigen::Index>(x + k, 0, cols - 1)));
      tmp(y, x) = v;
    }
  }
  RealImage<Scalar> out(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      Scalar v = tmp(y, x);
      for (int k = -radius; k <= radius; ++k) v = pick(v, tmp(std::clamp<Eigen::Index>(y + k, 0, rows - 1), x));
      out(y, x) = v;
    }
  }
  return out;
}

inline void check_radius(int radius) {
  if (radius < 1) throw ConfigError("structuring element radius must be >= 1");
}

}  // namespace detail

template <typename Scalar>
RealImage<Scalar> dilate(const RealImage<Scalar>& image, int radius) {
  detail::check_radius(radius);
  return detail::rank_filter<Scalar, true>(image, radius);
}

template <typename Scalar>
RealImage<Scalar> erode(const RealImage<Scalar>& image, int radius) {
  detail::check_radius(radius);
  return detail::rank_filter<Scalar, false>(image, radius);
}

template <typename Scalar>
RealImage<Scalar> opening(const RealImage<Scalar>& image, int radius) {
  return dilate(erode(image, radius), radius);
}

template <typename Scalar>
RealImage<Scalar> closing(const RealImage<Scalar>& image, int radius) {
  return erode(dilate(image, radius), radius);
}

/// Dilation minus erosion.
template <typename Scalar>
RealImage<Scalar> morph_gradient(const RealImage<Scalar>& image, int radius) {
  return dilate(image, radius) - erode(image, radius);
}

/// Linear-interpolation quantile (type 7) of a non-empty sample.
template <typename Scalar>
Scalar quantile(std::vector<Scalar> values, double q) {
  if (values.empty()) throw DimensionError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const Scalar frac = static_cast<Scalar>(pos - static_cast<double>(lo));
  return values[lo] + frac * (values[hi] - values[lo]);
}

/// Pixels whose morphological gradient of |image| is positive and at least the
/// q-quantile of the positive gradient values.
template <typename Derived>
Mask detect_artifacts(const Eigen::MatrixBase<Derived>& image, int radius, double q) {
  using Scalar = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  if (!(q >= 0.0 && q < 1.0)) throw ConfigError("detect_artifacts: quantile must lie in [0, 1)");
  const RealImage<Scalar> magnitude = image.cwiseAbs();
  const RealImage<Scalar> g = morph_gradient(magnitude, radius);
  std::vector<Scalar> positive;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (g.data()[i] > 0) positive.push_back(g.data()[i]);
  }
  Mask mask = Mask::Constant(g.rows(), g.cols(), false);
  if (positive.empty()) return mask;
  const Scalar threshold = quantile(std::move(positive), q);
  for (Eigen::Index y = 0; y < g.rows(); ++y) {
    for (Eigen::Index x = 0; x < g.cols(); ++x) mask(y, x) = g(y, x) > 0 && g(y, x) >= threshold;
  }
  return mask;
}

/// Bounds from channelwise opening (lower) and closing (upper) of the SENSE image on
/// masked pixels; everything else unconstrained.
template <typename Derived>
auto build_bounds(const Eigen::MatrixBase<Derived>& image, const Mask& mask, int radius) {
  using Scalar = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  require_same_shape(image, mask, "build_bounds");
  auto c = ConstraintSet<Scalar>::unconstrained(image.rows(), image.cols());
  if (!mask.any()) return c;
  const RealImage<Scalar> re = image.real();
  const RealImage<Scalar> im = image.imag();
  const RealImage<Scalar> open_re = opening(re, radius), close_re = closing(re, radius);
  const RealImage<Scalar> open_im = opening(im, radius), close_im = closing(im, radius);
  for (Eigen::Index y = 0; y < image.rows(); ++y) {
    for (Eigen::Index x = 0; x < image.cols(); ++x) {
      if (!mask(y, x)) continue;
      c.lo_re(y, x) = open_re(y, x);
      c.hi_re(y, x) = close_re(y, x);
      c.lo_im(y, x) = open_im(y, x);
      c.hi_im(y, x) = close_im(y, x);
      c.active(y, x) = true;
    }
  }
  return c;
}

/// Five planes (lo_re, hi_re, lo_im, hi_im, mask) in the PSNS1 container; infinite
/// bounds are stored as +-FLT_MAX and flagged in the header.
void write_constraints(const std::filesystem::path& header_path, const ConstraintSet<double>& c);
ConstraintSet<double> read_constraints(const std::filesystem::path& header_path);

}  // namespace psense
