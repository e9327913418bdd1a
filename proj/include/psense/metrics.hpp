#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psense/core.hpp"
#include "psense/solvers.hpp"
#include "psense/wavelet.hpp"

namespace psense {

/// 20 log10(||ref|| / ||ref - est||); +infinity when est equals ref exactly.
template <typename A, typename B>
double snr_db(const Eigen::MatrixBase<A>& ref, const Eigen::MatrixBase<B>& est) {
  require_same_shape(ref, est, "snr_db");
  const double signal = static_cast<double>(ref.norm());
  if (!(signal > 0)) throw NumericalError("snr_db: reference image is all zero");
  const double error = static_cast<double>((ref - est).norm());
  if (error == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(signal / error);
}

/// Pearson correlation of two equally long samples; empty when either has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

struct LevelCorrelation {
  int level = 0;
  /// Approximation block at this level (partial synthesis of coarser subbands).
  std::optional<double> approximation;
  /// The three orientations pooled.
  std::optional<double> detail;
  std::array<std::optional<double>, 3> orientation;
};

/// Re/Im correlation per level, 1 (finest) to levels.
template <typename Scalar>
std::vector<LevelCorrelation> reim_correlation(const WaveletCoefficients<Scalar>& zeta, const WaveletBasis& basis) {
  auto split = [](const auto& block, std::vector<double>& re, std::vector<double>& im) {
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
      for (Eigen::Index c = 0; c < block.cols(); ++c) {
        re.push_back(static_cast<double>(block(r, c).real()));
        im.push_back(static_cast<double>(block(r, c).imag()));
      }
    }
  };
  std::vector<LevelCorrelation> out;
  for (int j = 1; j <= zeta.levels(); ++j) {
    LevelCorrelation row;
    row.level = j;
    std::vector<double> re, im;
    split(approximation_at(zeta, basis, j), re, im);
    row.approximation = pearson(re, im);
    std::vector<double> pooled_re, pooled_im;
    for (Orientation o : kOrientations) {
      re.clear();
      im.clear();
      split(zeta.detail(j, o), re, im);
      row.orientation[static_cast<std::size_t>(o)] = pearson(re, im);
      pooled_re.insert(pooled_re.end(), re.begin(), re.end());
      pooled_im.insert(pooled_im.end(), im.begin(), im.end());
    }
    row.detail = pearson(pooled_re, pooled_im);
    out.push_back(row);
  }
  return out;
}

struct RateCheck {
  bool pass = false;
  /// min over n of bound_n / dist_n (infinite when every distance is zero).
  double margin = 0.0;
  int tightest_n = 0;
};

inline constexpr double kRateSlack = 1e-6;

/// dist_n <= (1 - lambda gamma vartheta1 / (1 + gamma vartheta1))^(n-1) dist_1 (1 + slack) for every record.
RateCheck rate_bound(const ConvergenceTrace& trace, double gamma, double lambda, double vartheta1);

struct MetricRow {
  std::string slice;
  std::string method;
  double snr_db = 0.0;
};

/// CSV with header "slice,method,snr_db"; infinite SNR printed as "inf".
std::string format_metric_rows(const std::vector<MetricRow>& rows);

}  // namespace psense
