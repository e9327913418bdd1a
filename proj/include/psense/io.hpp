#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "psense/core.hpp"

namespace psense {

// PSNS1 container: a text header plus a raw little-endian file of interleaved
// (real, imag) float32 samples. Header layout, one field per line:
//
//   PSNS1
//   dims <planes> <height> <width>
//   dtype complex64
//   data <data file name, relative to the header's directory>
//   meta <key> <value>          (zero or more)
//
// Planes are stored back to back, each row-major.

inline constexpr const char* kContainerMagic = "PSNS1";

using Metadata = std::map<std::string, std::string>;

struct Container {
  std::vector<ComplexImaged> planes;
  Metadata meta;
};

/// Data file paired with a header: same stem, ".raw" extension.
std::filesystem::path data_path_for(const std::filesystem::path& header_path);

void write_container(const std::filesystem::path& header_path, const Container& container);
Container read_container(const std::filesystem::path& header_path);

void write_image(const std::filesystem::path& header_path, const ComplexImaged& image, const Metadata& meta = {});
ComplexImaged read_image(const std::filesystem::path& header_path);

void write_coil_data(const std::filesystem::path& header_path, const MultiCoilData<double>& data);
MultiCoilData<double> read_coil_data(const std::filesystem::path& header_path);

void write_maps(const std::filesystem::path& header_path, const SensitivityMaps<double>& maps);
SensitivityMaps<double> read_maps(const std::filesystem::path& header_path);

void write_covariance(const std::filesystem::path& header_path, const NoiseCovariance<double>& cov);
NoiseCovariance<double> read_covariance(const std::filesystem::path& header_path);

/// 8-bit grey levels round(255 |rho| / max |rho|), half away from zero; all-zero maps to 0.
std::vector<std::uint8_t> magnitude_pixels(const ComplexImaged& image);

/// Binary PGM (P5) of the normalized magnitude.
void export_magnitude(const ComplexImaged& image, const std::filesystem::path& path);

}  // namespace psense
