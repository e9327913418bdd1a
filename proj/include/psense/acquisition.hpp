#pragma once

#include <cmath>
#include <vector>

#include "psense/core.hpp"

namespace psense {

/// SENSE aliasing model: every reduced-grid position r = (y, x), 0 <= y < Y/R,
/// folds the R full-FOV pixels (y + j*Y/R, x), j = 0..R-1, through the L x R
/// encoding matrix S(r). Per-position Psi^{-1}-weighted quantities are precomputed.
template <typename Scalar>
class AcquisitionModel {
 public:
  using Matrix = ComplexMatrix<Scalar>;
  using Vector = ComplexVector<Scalar>;

  AcquisitionModel(SensitivityMaps<Scalar> maps, NoiseCovariance<Scalar> noise, int reduction)
      : maps_(std::move(maps)), noise_(std::move(noise)), reduction_(reduction) {
    maps_.validate();
    noise_.validate();
    if (reduction_ < 1) throw DimensionError("acquisition model: reduction factor must be >= 1");
    if (maps_.coil_count() < reduction_) {
      throw DimensionError("acquisition model: L=" + std::to_string(maps_.coil_count()) + " coils < R=" +
                           std::to_string(reduction_));
    }
    if (noise_.coil_count() != maps_.coil_count()) {
      throw DimensionError("acquisition model: covariance is " + std::to_string(noise_.coil_count()) +
                           "x" + std::to_string(noise_.coil_count()) + " but there are " +
                           std::to_string(maps_.coil_count()) + " coils");
    }
    if (maps_.height() % reduction_ != 0) {
      throw DimensionError("acquisition model: Y=" + std::to_string(maps_.height()) +
                           " is not divisible by R=" + std::to_string(reduction_));
    }

    const int L = maps_.coil_count();
    psi_inverse_ = noise_.psi.llt().solve(Matrix::Identity(L, L));
    psi_inverse_ = (Scalar(0.5) * (psi_inverse_ + psi_inverse_.adjoint())).eval();

    const Eigen::Index positions = reduced_height() * width();
    encoding_.resize(static_cast<std::size_t>(positions));
    adjoint_.resize(static_cast<std::size_t>(positions));
    gram_.resize(static_cast<std::size_t>(positions));
    for (Eigen::Index y = 0; y < reduced_height(); ++y) {
      for (Eigen::Index x = 0; x < width(); ++x) {
        const auto i = static_cast<std::size_t>(index(y, x));
        Matrix S(L, reduction_);
        for (int l = 0; l < L; ++l) {
          for (int j = 0; j < reduction_; ++j) S(l, j) = maps_.maps[static_cast<std::size_t>(l)](y + j * reduced_height(), x);
        }
        adjoint_[i] = S.adjoint() * psi_inverse_;
        Matrix G = adjoint_[i] * S;
        gram_[i] = Scalar(0.5) * (G + G.adjoint());
        encoding_[i] = std::move(S);
      }
    }
  }

  Eigen::Index height() const { return maps_.height(); }
  Eigen::Index width() const { return maps_.width(); }
  Eigen::Index reduced_height() const { return maps_.height() / reduction_; }
  int coils() const { return maps_.coil_count(); }
  int reduction() const { return reduction_; }
  Eigen::Index positions() const { return reduced_height() * width(); }
  Eigen::Index index(Eigen::Index y, Eigen::Index x) const { return y * width() + x; }

  const SensitivityMaps<Scalar>& maps() const { return maps_; }
  const NoiseCovariance<Scalar>& noise() const { return noise_; }
  const Matrix& psi_inverse() const { return psi_inverse_; }

  /// S(r), L x R.
  const Matrix& encoding(Eigen::Index y, Eigen::Index x) const { return encoding_[static_cast<std::size_t>(index(y, x))]; }
  /// S(r)^H Psi^{-1}, R x L.
  const Matrix& whitened_adjoint(Eigen::Index y, Eigen::Index x) const { return adjoint_[static_cast<std::size_t>(index(y, x))]; }
  /// S(r)^H Psi^{-1} S(r), R x R Hermitian PSD.
  const Matrix& gram(Eigen::Index y, Eigen::Index x) const { return gram_[static_cast<std::size_t>(index(y, x))]; }

  template <typename Derived>
  Vector stack(const Eigen::MatrixBase<Derived>& image, Eigen::Index y, Eigen::Index x) const {
    Vector v(reduction_);
    for (int j = 0; j < reduction_; ++j) v(j) = image(y + j * reduced_height(), x);
    return v;
  }

  template <typename Derived, typename V>
  void scatter(Eigen::MatrixBase<Derived>& image, Eigen::Index y, Eigen::Index x, const Eigen::MatrixBase<V>& v) const {
    for (int j = 0; j < reduction_; ++j) image(y + j * reduced_height(), x) = v(j);
  }

  Vector data_at(const MultiCoilData<Scalar>& d, Eigen::Index y, Eigen::Index x) const {
    Vector v(coils());
    for (int l = 0; l < coils(); ++l) v(l) = d.coils[static_cast<std::size_t>(l)](y, x);
    return v;
  }

  template <typename Derived>
  void check_image(const Eigen::MatrixBase<Derived>& image, const char* what) const {
    if (image.rows() != height() || image.cols() != width()) {
      throw DimensionError(std::string(what) + ": image is " + std::to_string(image.rows()) + "x" +
                           std::to_string(image.cols()) + ", model FOV is " + std::to_string(height()) + "x" +
                           std::to_string(width()));
    }
  }

  void check_data(const MultiCoilData<Scalar>& d, const char* what) const {
    d.validate();
    if (d.coil_count() != coils() || d.reduction != reduction_ || d.reduced_height() != reduced_height() ||
        d.width() != width()) {
      throw DimensionError(std::string(what) + ": coil data does not match the acquisition model");
    }
  }

 private:
  SensitivityMaps<Scalar> maps_;
  NoiseCovariance<Scalar> noise_;
  int reduction_;
  Matrix psi_inverse_;
  std::vector<Matrix> encoding_;
  std::vector<Matrix> adjoint_;
  std::vector<Matrix> gram_;
};

/// Noiseless aliased coil data d(r) = S(r) rho(r).
template <typename Derived, typename Scalar = typename Eigen::NumTraits<typename Derived::Scalar>::Real>
MultiCoilData<Scalar> forward(const Eigen::MatrixBase<Derived>& rho, const AcquisitionModel<Scalar>& model) {
  model.check_image(rho, "forward");
  MultiCoilData<Scalar> d;
  d.reduction = model.reduction();
  d.coils.assign(static_cast<std::size_t>(model.coils()), ComplexImage<Scalar>(model.reduced_height(), model.width()));
  for (Eigen::Index y = 0; y < model.reduced_height(); ++y) {
    for (Eigen::Index x = 0; x < model.width(); ++x) {
      const ComplexVector<Scalar> v = model.encoding(y, x) * model.stack(rho, y, x);
      for (int l = 0; l < model.coils(); ++l) d.coils[static_cast<std::size_t>(l)](y, x) = v(l);
    }
  }
  return d;
}

/// J_L(rho) = sum_r ||d(r) - S(r) rho(r)||^2_{Psi^{-1}}; when `gradient` is non-null it
/// receives u with u(r) = 2 S^H Psi^{-1} (S rho(r) - d(r)) unfolded to the full FOV.
template <typename Derived, typename Scalar = typename Eigen::NumTraits<typename Derived::Scalar>::Real>
Scalar data_fidelity(const Eigen::MatrixBase<Derived>& rho, const MultiCoilData<Scalar>& d,
                     const AcquisitionModel<Scalar>& model, ComplexImage<Scalar>* gradient = nullptr) {
  model.check_image(rho, "data_fidelity");
  model.check_data(d, "data_fidelity");
  if (gradient) gradient->resize(model.height(), model.width());
  Scalar total = 0;
  for (Eigen::Index y = 0; y < model.reduced_height(); ++y) {
    for (Eigen::Index x = 0; x < model.width(); ++x) {
      const ComplexVector<Scalar> residual = model.encoding(y, x) * model.stack(rho, y, x) - model.data_at(d, y, x);
      const ComplexVector<Scalar> weighted = model.psi_inverse() * residual;
      total += residual.dot(weighted).real();
      if (gradient) {
        const ComplexVector<Scalar> u = Scalar(2) * (model.encoding(y, x).adjoint() * weighted);
        model.scatter(*gradient, y, x, u);
      }
    }
  }
  return total;
}

/// Gradient of J_L at rho (with respect to Re and Im, packed as a complex image).
template <typename Derived, typename Scalar = typename Eigen::NumTraits<typename Derived::Scalar>::Real>
ComplexImage<Scalar> gradient_JL(const Eigen::MatrixBase<Derived>& rho, const MultiCoilData<Scalar>& d,
                                 const AcquisitionModel<Scalar>& model) {
  ComplexImage<Scalar> u;
  data_fidelity(rho, d, model, &u);
  return u;
}

namespace detail {

inline constexpr double kPowerTolerance = 1e-10;
inline constexpr int kPowerMaxIterations = 1000;

}  // namespace detail

/// Largest eigenvalue of a small Hermitian PSD matrix: closed form up to 2x2,
/// power iteration beyond.
template <typename Scalar>
Scalar hermitian_max_eigenvalue(const ComplexMatrix<Scalar>& G) {
  const Eigen::Index n = G.rows();
  if (n == 1) return G(0, 0).real();
  if (n == 2) {
    const Scalar a = G(0, 0).real();
    const Scalar d = G(1, 1).real();
    const Scalar half_gap = (a - d) / 2;
    return (a + d) / 2 + std::sqrt(half_gap * half_gap + std::norm(G(0, 1)));
  }
  Eigen::Index start = 0;
  G.diagonal().real().maxCoeff(&start);
  ComplexVector<Scalar> v = G.col(start);
  Scalar norm = v.norm();
  if (!(norm > 0)) return Scalar(0);
  v /= norm;
  Scalar lambda = v.dot(G * v).real();
  for (int it = 0; it < detail::kPowerMaxIterations; ++it) {
    ComplexVector<Scalar> w = G * v;
    norm = w.norm();
    if (!(norm > 0)) return Scalar(0);
    v = w / norm;
    const Scalar next = v.dot(G * v).real();
    const bool done = std::abs(next - lambda) <= Scalar(detail::kPowerTolerance) * std::abs(next);
    lambda = next;
    if (done) break;
  }
  return lambda;
}

/// theta = max_r lambda_max(S^H Psi^{-1} S); gradient of J_L is 2 theta-Lipschitz.
template <typename Scalar>
Scalar spectral_bound(const AcquisitionModel<Scalar>& model) {
  Scalar theta = 0;
  for (Eigen::Index y = 0; y < model.reduced_height(); ++y) {
    for (Eigen::Index x = 0; x < model.width(); ++x) {
      theta = std::max(theta, hermitian_max_eigenvalue(model.gram(y, x)));
    }
  }
  if (!(theta > 0) || !std::isfinite(theta)) {
    throw NumericalError("spectral bound is zero: sensitivities vanish everywhere, no valid step size");
  }
  return theta;
}

enum class CovarianceModel {
  sensitivity_overlap,  // Psi(l1,l2) from normalized sensitivity overlaps, scaled by sigma_n^2
  identity              // Psi = sigma_n^2 I
};

/// Psi(l1,l2) = sigma_n^2 sum s_l1 s_l2^* / sqrt(sum|s_l1|^2 sum|s_l2|^2), sums over the full FOV.
template <typename Scalar>
NoiseCovariance<Scalar> build_covariance(const SensitivityMaps<Scalar>& maps, Scalar sigma_n,
                                         CovarianceModel model = CovarianceModel::sensitivity_overlap) {
  maps.validate();
  if (!(sigma_n > 0)) throw ConfigError("build_covariance: sigma_n must be > 0");
  const int L = maps.coil_count();
  NoiseCovariance<Scalar> out;
  out.sigma_n = sigma_n;
  const Scalar var = sigma_n * sigma_n;
  if (model == CovarianceModel::identity) {
    out.psi = var * ComplexMatrix<Scalar>::Identity(L, L);
    return out;
  }
  std::vector<Scalar> energy(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    energy[static_cast<std::size_t>(l)] = maps.maps[static_cast<std::size_t>(l)].squaredNorm();
    if (!(energy[static_cast<std::size_t>(l)] > 0)) {
      throw NumericalError("build_covariance: coil " + std::to_string(l) + " has an identically zero map");
    }
  }
  out.psi.resize(L, L);
  for (int a = 0; a < L; ++a) {
    out.psi(a, a) = var;
    for (int b = a + 1; b < L; ++b) {
      const auto& sa = maps.maps[static_cast<std::size_t>(a)];
      const auto& sb = maps.maps[static_cast<std::size_t>(b)];
      Complex<Scalar> acc(0);
      for (Eigen::Index y = 0; y < sa.rows(); ++y) {
        for (Eigen::Index x = 0; x < sa.cols(); ++x) acc += sa(y, x) * std::conj(sb(y, x));
      }
      const Complex<Scalar> v = var * acc / std::sqrt(energy[static_cast<std::size_t>(a)] * energy[static_cast<std::size_t>(b)]);
      out.psi(a, b) = v;
      out.psi(b, a) = std::conj(v);
    }
  }
  return out;
}

}  // namespace psense
