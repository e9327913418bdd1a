#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "psense/acquisition.hpp"
#include "psense/core.hpp"

namespace psense::testing {

inline ComplexImaged random_image(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  ComplexImaged out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = {g(rng), g(rng)};
  return out;
}

inline ComplexMatrix<double> random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix<double> out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = {g(rng), g(rng)};
  return out;
}

/// Random maps and a random Hermitian positive definite covariance.
inline AcquisitionModel<double> random_model(int coils, int reduction, Eigen::Index rows, Eigen::Index cols,
                                             std::mt19937_64& rng) {
  SensitivityMaps<double> maps;
  for (int l = 0; l < coils; ++l) maps.maps.push_back(random_image(rows, cols, rng));
  NoiseCovariance<double> noise;
  const ComplexMatrix<double> a = random_matrix(coils, coils, rng);
  noise.psi = a * a.adjoint() + double(coils) * ComplexMatrix<double>::Identity(coils, coils);
  noise.sigma_n = 1.0;
  return AcquisitionModel<double>(maps, noise, reduction);
}

inline MultiCoilData<double> random_data(const AcquisitionModel<double>& model, std::mt19937_64& rng) {
  MultiCoilData<double> d;
  d.reduction = model.reduction();
  for (int l = 0; l < model.coils(); ++l) d.coils.push_back(random_image(model.reduced_height(), model.width(), rng));
  return d;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("psense-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace psense::testing
