#include "psense/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace psense {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

void ensure_finite_float(double v) {
  if (std::isfinite(v) && std::abs(v) > static_cast<double>(std::numeric_limits<float>::max())) {
    throw IoError("container: value " + std::to_string(v) + " overflows complex64");
  }
}

std::string require_token(std::istringstream& in, const std::string& field, const fs::path& path) {
  std::string tok;
  if (!(in >> tok)) throw IoError(path.string() + ": malformed '" + field + "' line");
  return tok;
}

}  // namespace

fs::path data_path_for(const fs::path& header_path) {
  fs::path p = header_path;
  p.replace_extension(".raw");
  return p;
}

void write_container(const fs::path& header_path, const Container& container) {
  if (container.planes.empty()) throw DimensionError("container: no planes to write");
  const auto& first = container.planes.front();
  require_nonempty(first, "container");
  for (const auto& p : container.planes) require_same_shape(p, first, "container");

  const fs::path data_path = data_path_for(header_path);
  {
    std::ofstream hdr(header_path, std::ios::trunc);
    if (!hdr) throw IoError("cannot open '" + header_path.string() + "' for writing");
    hdr << kContainerMagic << '\n';
    hdr << "dims " << container.planes.size() << ' ' << first.rows() << ' ' << first.cols() << '\n';
    hdr << "dtype complex64\n";
    hdr << "data " << data_path.filename().string() << '\n';
    for (const auto& [key, value] : container.meta) {
      if (key.find_first_of(" \t\n") != std::string::npos || value.find('\n') != std::string::npos) {
        throw IoError("container: metadata key/value must be single-line and key without spaces: '" + key + "'");
      }
      hdr << "meta " << key << ' ' << value << '\n';
    }
    if (!hdr) throw IoError("failed writing '" + header_path.string() + "'");
  }

  std::vector<float> buffer;
  buffer.reserve(container.planes.size() * static_cast<std::size_t>(first.size()) * 2);
  for (const auto& plane : container.planes) {
    for (Eigen::Index y = 0; y < plane.rows(); ++y) {
      for (Eigen::Index x = 0; x < plane.cols(); ++x) {
        ensure_finite_float(plane(y, x).real());
        ensure_finite_float(plane(y, x).imag());
        buffer.push_back(static_cast<float>(plane(y, x).real()));
        buffer.push_back(static_cast<float>(plane(y, x).imag()));
      }
    }
  }
  std::ofstream raw(data_path, std::ios::binary | std::ios::trunc);
  if (!raw) throw IoError("cannot open '" + data_path.string() + "' for writing");
  raw.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * sizeof(float)));
  if (!raw) throw IoError("failed writing '" + data_path.string() + "'");
}

Container read_container(const fs::path& header_path) {
  std::ifstream hdr(header_path);
  if (!hdr) throw IoError("cannot open header '" + header_path.string() + "'");

  std::string line;
  if (!std::getline(hdr, line) || line != kContainerMagic) {
    throw IoError(header_path.string() + ": bad magic string (expected " + kContainerMagic + ")");
  }

  long long planes = -1, height = -1, width = -1;
  std::string dtype, data_name;
  Container out;
  int line_no = 1;
  while (std::getline(hdr, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream in(line);
    std::string field;
    in >> field;
    if (field == "dims") {
      if (!(in >> planes >> height >> width)) throw IoError(header_path.string() + ": malformed dims line");
    } else if (field == "dtype") {
      dtype = require_token(in, field, header_path);
    } else if (field == "data") {
      data_name = require_token(in, field, header_path);
    } else if (field == "meta") {
      std::string key = require_token(in, field, header_path);
      std::string value;
      std::getline(in >> std::ws, value);
      out.meta[key] = value;
    } else {
      throw IoError(header_path.string() + ":" + std::to_string(line_no) + ": unknown header field '" + field + "'");
    }
  }
  if (planes < 1 || height < 1 || width < 1) throw IoError(header_path.string() + ": missing or invalid dims");
  if (dtype != "complex64") throw IoError(header_path.string() + ": unsupported dtype '" + dtype + "'");
  if (data_name.empty()) throw IoError(header_path.string() + ": missing data field");

  const fs::path data_path = header_path.parent_path() / data_name;
  std::ifstream raw(data_path, std::ios::binary);
  if (!raw) throw IoError("cannot open data file '" + data_path.string() + "'");
  raw.seekg(0, std::ios::end);
  const auto bytes = static_cast<unsigned long long>(raw.tellg());
  raw.seekg(0, std::ios::beg);
  const unsigned long long expected =
      static_cast<unsigned long long>(planes) * static_cast<unsigned long long>(height) *
      static_cast<unsigned long long>(width) * 2ULL * sizeof(float);
  if (bytes != expected) {
    throw IoError(data_path.string() + ": byte-count mismatch (header implies " + std::to_string(expected) +
                  " bytes, file has " + std::to_string(bytes) + ")");
  }

  std::vector<float> buffer(static_cast<std::size_t>(expected / sizeof(float)));
  raw.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(expected));
  if (!raw) throw IoError("failed reading '" + data_path.string() + "'");

  std::size_t k = 0;
  out.planes.reserve(static_cast<std::size_t>(planes));
  for (long long p = 0; p < planes; ++p) {
    ComplexImaged plane(height, width);
    for (Eigen::Index y = 0; y < height; ++y) {
      for (Eigen::Index x = 0; x < width; ++x) {
        plane(y, x) = {buffer[k], buffer[k + 1]};
        k += 2;
      }
    }
    out.planes.push_back(std::move(plane));
  }
  return out;
}

void write_image(const fs::path& header_path, const ComplexImaged& image, const Metadata& meta) {
  write_container(header_path, Container{{image}, meta});
}

ComplexImaged read_image(const fs::path& header_path) {
  Container c = read_container(header_path);
  if (c.planes.size() != 1) {
    throw IoError(header_path.string() + ": expected a single image plane, found " + std::to_string(c.planes.size()));
  }
  return std::move(c.planes.front());
}

void write_coil_data(const fs::path& header_path, const MultiCoilData<double>& data) {
  data.validate();
  write_container(header_path, Container{data.coils, {{"kind", "coil-data"}, {"reduction", std::to_string(data.reduction)}}});
}

MultiCoilData<double> read_coil_data(const fs::path& header_path) {
  Container c = read_container(header_path);
  auto it = c.meta.find("reduction");
  if (it == c.meta.end()) throw IoError(header_path.string() + ": coil data lacks 'reduction' metadata");
  MultiCoilData<double> out;
  try {
    out.reduction = std::stoi(it->second);
  } catch (const std::exception&) {
    throw IoError(header_path.string() + ": invalid reduction '" + it->second + "'");
  }
  out.coils = std::move(c.planes);
  out.validate();
  return out;
}

void write_maps(const fs::path& header_path, const SensitivityMaps<double>& maps) {
  maps.validate();
  write_container(header_path, Container{maps.maps, {{"kind", "sensitivity-maps"}}});
}

SensitivityMaps<double> read_maps(const fs::path& header_path) {
  SensitivityMaps<double> out{read_container(header_path).planes};
  out.validate();
  return out;
}

void write_covariance(const fs::path& header_path, const NoiseCovariance<double>& cov) {
  // Psi is stored as one L x L plane; sigma_n printed with round-trip precision.
  ComplexImaged plane = cov.psi;
  std::ostringstream sigma;
  sigma.precision(17);
  sigma << cov.sigma_n;
  write_container(header_path, Container{{plane}, {{"kind", "noise-covariance"}, {"sigma_n", sigma.str()}}});
}

NoiseCovariance<double> read_covariance(const fs::path& header_path) {
  Container c = read_container(header_path);
  if (c.planes.size() != 1 || c.planes.front().rows() != c.planes.front().cols()) {
    throw IoError(header_path.string() + ": covariance must be a single square plane");
  }
  NoiseCovariance<double> out;
  out.psi = c.planes.front();
  // Hand-written files may be Hermitian only up to float rounding.
  out.psi = (0.5 * (out.psi + out.psi.adjoint())).eval();
  auto it = c.meta.find("sigma_n");
  out.sigma_n = it == c.meta.end() ? 0.0 : std::stod(it->second);
  return out;
}

std::vector<std::uint8_t> magnitude_pixels(const ComplexImaged& image) {
  require_nonempty(image, "export_magnitude");
  const RealImaged mag = image.cwiseAbs();
  const double peak = mag.maxCoeff();
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(mag.size()), 0);
  if (!(peak > 0)) return pixels;
  std::size_t k = 0;
  for (Eigen::Index y = 0; y < mag.rows(); ++y) {
    for (Eigen::Index x = 0; x < mag.cols(); ++x) {
      // std::round is half-away-from-zero.
      const double v = std::round(255.0 * mag(y, x) / peak);
      pixels[k++] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  return pixels;
}

void export_magnitude(const ComplexImaged& image, const fs::path& path) {
  const auto pixels = magnitude_pixels(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace psense
