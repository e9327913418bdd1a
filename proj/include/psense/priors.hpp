#pragma once

#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "psense/core.hpp"
#include "psense/wavelet.hpp"

namespace psense {

/// One channel of a Generalized Gauss-Laplace prior:
/// f(x) = sqrt(beta/2pi) exp(-(alpha|x| + beta x^2/2 + alpha^2/(2 beta))) / erfc(alpha/sqrt(2 beta)).
struct GglParams {
  double alpha = 0.0;
  double beta = 1.0;
};

struct GaussianParams {
  double mean = 0.0;
  double sigma = 1.0;
};

/// GGL weights of one detail subband, real and imaginary channels.
struct SubbandParams {
  double alpha_re = 0.0;
  double alpha_im = 0.0;
  double beta_re = 1.0;
  double beta_im = 1.0;
};

/// Prior parameters for every subband: 3 * levels detail entries plus the Gaussian
/// approximation-band parameters.
struct Hyperparameters {
  int levels = 0;
  std::vector<SubbandParams> details;
  double mu_re = 0.0;
  double mu_im = 0.0;
  double sigma_re = 1.0;
  double sigma_im = 1.0;

  static Hyperparameters uniform(int levels, SubbandParams detail, GaussianParams re, GaussianParams im);

  SubbandParams& detail(int level, Orientation o);
  const SubbandParams& detail(int level, Orientation o) const;

  void validate() const;
};

/// Strong-convexity constants of J_P: J_P(z) >= vartheta1/2 ||z||^2 - vartheta0.
struct ConvexityConstants {
  double vartheta0 = 0.0;
  double vartheta1 = 0.0;
};

ConvexityConstants convexity_constants(const Hyperparameters& h, Eigen::Index approximation_count);

/// erfc(t) exp(t^2), stable for large t.
double erfcx(double t);
/// log erfc(t) without underflow.
double log_erfc(double t);

double ggl_pdf(double xi, double alpha, double beta);

/// Sum of log ggl_pdf over the samples.
double ggl_log_likelihood(std::span<const double> samples, double alpha, double beta);

/// Maximum-likelihood (alpha >= 0, beta > 0) for one channel of one subband.
GglParams fit_ggl(std::span<const double> samples);

/// Sample mean and ML (population) deviation, floored at 1e-12.
GaussianParams fit_gaussian(std::span<const double> samples);

inline constexpr double kSigmaFloor = 1e-12;

Hyperparameters estimate_hyperparameters(const ComplexImaged& reference, const WaveletBasis& basis, int levels);

std::string format_hyperparameters(const Hyperparameters& h);
Hyperparameters parse_hyperparameters(const std::string& text);
void write_hyperparameters(const std::filesystem::path& path, const Hyperparameters& h);
Hyperparameters read_hyperparameters(const std::filesystem::path& path);

/// Proximity operator of gamma * (alpha |x - mu| + beta/2 (x - mu)^2).
template <typename Scalar>
Scalar prox_scalar(Scalar xi, Scalar alpha, Scalar beta, Scalar mu, Scalar gamma) {
  const Scalar shifted = xi - mu;
  const Scalar sign = shifted >= 0 ? Scalar(1) : Scalar(-1);
  const Scalar magnitude = std::max(std::abs(shifted) - gamma * alpha, Scalar(0));
  return sign * magnitude / (gamma * beta + Scalar(1)) + mu;
}

/// Separable complex prox: real and imaginary parts go through their own scalar prox.
template <typename Scalar>
Complex<Scalar> prox_complex(const Complex<Scalar>& xi, const SubbandParams& p, const Complex<Scalar>& mu,
                             Scalar gamma) {
  return {prox_scalar<Scalar>(xi.real(), static_cast<Scalar>(p.alpha_re), static_cast<Scalar>(p.beta_re), mu.real(), gamma),
          prox_scalar<Scalar>(xi.imag(), static_cast<Scalar>(p.alpha_im), static_cast<Scalar>(p.beta_im), mu.imag(), gamma)};
}

namespace detail {

inline void check_prior_layout(const Hyperparameters& h, int levels) {
  if (h.levels != levels || h.details.size() != static_cast<std::size_t>(3 * levels)) {
    throw DimensionError("hyperparameters describe " + std::to_string(h.levels) +
                         " levels but the coefficients have " + std::to_string(levels));
  }
}

}  // namespace detail

/// prox of gamma * J_P, coefficientwise: GGL prox on details, Gaussian prox on the approximation.
template <typename Scalar>
WaveletCoefficients<Scalar> prox_penalty(const WaveletCoefficients<Scalar>& zeta, const Hyperparameters& h,
                                         Scalar gamma) {
  detail::check_prior_layout(h, zeta.levels());
  WaveletCoefficients<Scalar> out = zeta;
  const Complex<Scalar> zero(0);
  for (int j = 1; j <= zeta.levels(); ++j) {
    for (Orientation o : kOrientations) {
      const SubbandParams& p = h.detail(j, o);
      auto block = out.detail(j, o);
      for (Eigen::Index r = 0; r < block.rows(); ++r) {
        for (Eigen::Index c = 0; c < block.cols(); ++c) block(r, c) = prox_complex<Scalar>(block(r, c), p, zero, gamma);
      }
    }
  }
  const SubbandParams approx{0.0, 0.0, 1.0 / (h.sigma_re * h.sigma_re), 1.0 / (h.sigma_im * h.sigma_im)};
  const Complex<Scalar> mu(static_cast<Scalar>(h.mu_re), static_cast<Scalar>(h.mu_im));
  auto block = out.approximation();
  for (Eigen::Index r = 0; r < block.rows(); ++r) {
    for (Eigen::Index c = 0; c < block.cols(); ++c) block(r, c) = prox_complex<Scalar>(block(r, c), approx, mu, gamma);
  }
  return out;
}

/// J_P(zeta): Gaussian term on the approximation block, GGL terms on the details.
template <typename Scalar>
Scalar penalty(const WaveletCoefficients<Scalar>& zeta, const Hyperparameters& h) {
  detail::check_prior_layout(h, zeta.levels());
  Scalar total = 0;
  const auto approx = zeta.approximation();
  const Scalar inv_re = Scalar(1) / (2 * static_cast<Scalar>(h.sigma_re * h.sigma_re));
  const Scalar inv_im = Scalar(1) / (2 * static_cast<Scalar>(h.sigma_im * h.sigma_im));
  for (Eigen::Index r = 0; r < approx.rows(); ++r) {
    for (Eigen::Index c = 0; c < approx.cols(); ++c) {
      const Scalar dr = approx(r, c).real() - static_cast<Scalar>(h.mu_re);
      const Scalar di = approx(r, c).imag() - static_cast<Scalar>(h.mu_im);
      total += dr * dr * inv_re + di * di * inv_im;
    }
  }
  for (int j = 1; j <= zeta.levels(); ++j) {
    for (Orientation o : kOrientations) {
      const SubbandParams& p = h.detail(j, o);
      const auto block = zeta.detail(j, o);
      for (Eigen::Index r = 0; r < block.rows(); ++r) {
        for (Eigen::Index c = 0; c < block.cols(); ++c) {
          const Scalar re = block(r, c).real();
          const Scalar im = block(r, c).imag();
          total += static_cast<Scalar>(p.alpha_re) * std::abs(re) + static_cast<Scalar>(p.beta_re) / 2 * re * re +
                   static_cast<Scalar>(p.alpha_im) * std::abs(im) + static_cast<Scalar>(p.beta_im) / 2 * im * im;
        }
      }
    }
  }
  return total;
}

}  // namespace psense
