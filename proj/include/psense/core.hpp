#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace psense {

// Errors are reported by exception. The CLI maps each family to an exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shape or layout mismatch between operands, or an invalid argument.
struct DimensionError : Error {
  using Error::Error;
};

/// Invalid configuration: bad parameter values, violated step-size conditions.
struct ConfigError : Error {
  using Error::Error;
};

/// Non-finite values or a degenerate numerical setting (zero spectral bound, singular system).
struct NumericalError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

template <typename Scalar>
using Complex = std::complex<Scalar>;

/// Y x X complex field, row-major; row index is y (phase encoding), column index is x.
template <typename Scalar>
using ComplexImage = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RealImage = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using ComplexMatrix = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using ComplexVector = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, 1>;

using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ComplexImaged = ComplexImage<double>;
using RealImaged = RealImage<double>;

template <typename Derived>
void require_nonempty(const Eigen::MatrixBase<Derived>& image, const char* what) {
  if (image.rows() < 1 || image.cols() < 1) {
    throw DimensionError(std::string(what) + ": image must be at least 1x1");
  }
}

template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
  }
}

/// Real inner product Re<a, b> on C^K, the one the gradient and Lipschitz bounds are stated in.
template <typename A, typename B>
auto real_inner(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using Scalar = typename Eigen::NumTraits<typename A::Scalar>::Real;
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const auto& x = a(i, j);
      const auto& y = b(i, j);
      acc += x.real() * y.real() + x.imag() * y.imag();
    }
  }
  return acc;
}

/// Reduced-FOV data of L coils. Each coil image is (Y/R) x X.
template <typename Scalar>
struct MultiCoilData {
  int reduction = 1;
  std::vector<ComplexImage<Scalar>> coils;

  int coil_count() const { return static_cast<int>(coils.size()); }
  Eigen::Index reduced_height() const { return coils.empty() ? 0 : coils.front().rows(); }
  Eigen::Index width() const { return coils.empty() ? 0 : coils.front().cols(); }
  Eigen::Index full_height() const { return reduced_height() * reduction; }

  void validate() const {
    if (reduction < 1) throw DimensionError("multi-coil data: reduction factor must be >= 1");
    if (coils.empty()) throw DimensionError("multi-coil data: no coils");
    if (coil_count() < reduction) {
      throw DimensionError("multi-coil data: coil count L=" + std::to_string(coil_count()) +
                           " is smaller than reduction factor R=" + std::to_string(reduction));
    }
    for (const auto& c : coils) {
      require_nonempty(c, "multi-coil data");
      require_same_shape(c, coils.front(), "multi-coil data");
    }
  }
};

/// Full-FOV coil sensitivity profiles s_l.
template <typename Scalar>
struct SensitivityMaps {
  std::vector<ComplexImage<Scalar>> maps;

  int coil_count() const { return static_cast<int>(maps.size()); }
  Eigen::Index height() const { return maps.empty() ? 0 : maps.front().rows(); }
  Eigen::Index width() const { return maps.empty() ? 0 : maps.front().cols(); }

  void validate() const {
    if (maps.empty()) throw DimensionError("sensitivity maps: no coils");
    for (const auto& m : maps) {
      require_nonempty(m, "sensitivity maps");
      require_same_shape(m, maps.front(), "sensitivity maps");
    }
  }
};

/// Between-coil noise covariance Psi (L x L, Hermitian positive definite) and the noise deviation.
template <typename Scalar>
struct NoiseCovariance {
  ComplexMatrix<Scalar> psi;
  Scalar sigma_n = 0;

  int coil_count() const { return static_cast<int>(psi.rows()); }

  void validate() const {
    if (psi.rows() < 1 || psi.rows() != psi.cols()) throw DimensionError("noise covariance: matrix must be square");
    const Scalar scale = std::max<Scalar>(psi.cwiseAbs().maxCoeff(), std::numeric_limits<Scalar>::min());
    if ((psi - psi.adjoint()).cwiseAbs().maxCoeff() > Scalar(1e-12) * scale) {
      throw NumericalError("noise covariance: matrix is not Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix<Scalar>> eig(psi, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 0)) {
      throw NumericalError("noise covariance: matrix is not positive definite");
    }
  }
};

}  // namespace psense
