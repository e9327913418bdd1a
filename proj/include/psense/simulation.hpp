#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "psense/acquisition.hpp"
#include "psense/core.hpp"

namespace psense {

enum class PhantomKind { shepp_logan, checker, flat };

const char* phantom_name(PhantomKind kind);

struct SimulationConfig {
  PhantomKind phantom = PhantomKind::shepp_logan;
  int height = 64;
  int width = 64;
  int coils = 8;
  int reduction = 2;
  double sigma_n = 1.0;
  /// Gaussian decay length of each coil profile, in pixels.
  double coil_scale = 16.0;
  std::uint64_t seed = 1;
  /// Peak phase excursion (radians) of the smooth phase applied to the phantom; 0 keeps it real.
  double phantom_phase = 0.5;
  /// Relative amplitude of the smooth multiplicative error applied to the maps handed to
  /// reconstruction (0: reconstruction sees the true maps).
  double map_error = 0.0;
  CovarianceModel covariance = CovarianceModel::sensitivity_overlap;
  /// Downstream wavelet depth the image size must support (0 skips the check).
  int levels = 0;

  void validate() const;
};

/// Parses flat `key = value` lines with `#` comments. Unknown keys and bad values are
/// ConfigError with the offending line number.
SimulationConfig parse_simulation_config(const std::string& text);
SimulationConfig load_simulation_config(const std::filesystem::path& path);
std::string format_simulation_config(const SimulationConfig& config);

struct Simulation {
  ComplexImaged reference;
  /// Maps used to generate the data.
  SensitivityMaps<double> true_maps;
  /// Maps handed to reconstruction (true maps times the mis-estimation perturbation).
  SensitivityMaps<double> maps;
  NoiseCovariance<double> noise;
  MultiCoilData<double> data;
};

/// Real phantom with intensities in [0, 255].
RealImaged make_phantom(PhantomKind kind, int height, int width);

/// Smooth complex coil profiles: Gaussian decay from coil centres spread around the FOV,
/// a low-order polynomial modulation and a phase ramp across the FOV.
SensitivityMaps<double> make_coil_maps(int coils, int height, int width, double scale);

/// Deterministic per-position generator seed.
std::uint64_t position_seed(std::uint64_t seed, std::uint64_t position);

/// Circular complex Gaussian noise with covariance Psi, i.i.d. across reduced positions.
MultiCoilData<double> sample_noise(const NoiseCovariance<double>& noise, int reduction, Eigen::Index reduced_height,
                                   Eigen::Index width, std::uint64_t seed);

Simulation simulate(const SimulationConfig& config);

/// 64-bit FNV-1a, used for config hashes in run manifests.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace psense
