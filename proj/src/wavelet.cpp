#include "psense/wavelet.hpp"

#include <cmath>

namespace psense {

namespace {

// 8-tap Daubechies (minimum phase, 4 vanishing moments).
constexpr double kDaubechies8[] = {
    0.23037781330889650086,  0.71484657055291564709, 0.63088076792985890788,  -0.027983769416859854211,
    -0.18703481171909308408, 0.030841381835560763627, 0.032883011666885199735, -0.010597401785069032105,
};

// 8-tap Symmlet (least asymmetric, 4 vanishing moments).
constexpr double kSymmlet8[] = {
    0.032223100604051467872, -0.012603967262031303754, -0.099219543576633532585, 0.2978577956053060514,
    0.80373875180513208088,  0.49761866763277498998,   -0.029635527646002491764, -0.075765714789502213228,
};

constexpr double kOrthonormalityTolerance = 1e-10;

}  // namespace

WaveletBasis::WaveletBasis(WaveletFamily family, std::string name, std::vector<double> lowpass)
    : family_(family), name_(std::move(name)), lowpass_(std::move(lowpass)) {
  const std::size_t n = lowpass_.size();
  highpass_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    highpass_[k] = ((k % 2 == 0) ? 1.0 : -1.0) * lowpass_[n - 1 - k];
  }
  if (orthonormality_defect() > kOrthonormalityTolerance) {
    throw NumericalError("wavelet basis '" + name_ + "' fails the orthonormality check");
  }
}

WaveletBasis WaveletBasis::make(WaveletFamily family) {
  switch (family) {
    case WaveletFamily::haar: {
      const double r = 1.0 / std::sqrt(2.0);
      return WaveletBasis(family, "haar", {r, r});
    }
    case WaveletFamily::db8:
      return WaveletBasis(family, "db8", {std::begin(kDaubechies8), std::end(kDaubechies8)});
    case WaveletFamily::sym8:
      return WaveletBasis(family, "sym8", {std::begin(kSymmlet8), std::end(kSymmlet8)});
  }
  throw ConfigError("unknown wavelet family");
}

WaveletBasis WaveletBasis::from_name(std::string_view name) {
  if (name == "haar") return make(WaveletFamily::haar);
  if (name == "db8") return make(WaveletFamily::db8);
  if (name == "sym8") return make(WaveletFamily::sym8);
  throw ConfigError("unknown wavelet '" + std::string(name) + "' (expected haar, db8 or sym8)");
}

double WaveletBasis::orthonormality_defect() const {
  const std::size_t n = lowpass_.size();
  double worst = 0;
  for (std::size_t shift = 0; shift < n; shift += 2) {
    double acc = 0;
    for (std::size_t k = 0; k + shift < n; ++k) acc += lowpass_[k] * lowpass_[k + shift];
    worst = std::max(worst, std::abs(acc - (shift == 0 ? 1.0 : 0.0)));
  }
  return worst;
}

const char* orientation_name(Orientation o) {
  switch (o) {
    case Orientation::horizontal: return "horizontal";
    case Orientation::vertical: return "vertical";
    case Orientation::diagonal: return "diagonal";
  }
  return "?";
}

Orientation orientation_from_name(std::string_view name) {
  if (name == "horizontal") return Orientation::horizontal;
  if (name == "vertical") return Orientation::vertical;
  if (name == "diagonal") return Orientation::diagonal;
  throw ConfigError("unknown orientation '" + std::string(name) + "'");
}

}  // namespace psense
