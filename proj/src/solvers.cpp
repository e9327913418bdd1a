#include "psense/solvers.hpp"

#include <fstream>
#include <sstream>

namespace psense {

double resolve_step(const SolverConfig& config, double theta) {
  return config.gamma ? *config.gamma : kDefaultStepFactor / theta;
}

std::vector<std::string> check_solver_config(const SolverConfig& config, double theta) {
  std::vector<std::string> warnings;
  if (!(theta > 0) || !std::isfinite(theta)) throw NumericalError("spectral bound must be positive and finite");
  const double gamma = resolve_step(config, theta);
  if (!(gamma > 0) || !(gamma < 1.0 / theta)) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "step size gamma=" << gamma << " violates 0 < gamma < 1/theta=" << 1.0 / theta;
    throw ConfigError(msg.str());
  }
  if (!(config.lambda > 0 && config.lambda <= 1)) throw ConfigError("relaxation lambda must lie in (0, 1]");
  if (!(config.epsilon > 0 && config.epsilon < 1)) throw ConfigError("stopping tolerance epsilon must lie in (0, 1)");
  if (config.max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(config.tau > 0 && config.tau <= 2)) throw ConfigError("Douglas-Rachford tau must lie in (0, 2]");
  if (!(config.inner_tolerance > 0)) throw ConfigError("inner tolerance must be > 0");
  if (config.inner_max_iterations < 1) throw ConfigError("inner iteration cap must be >= 1");
  if (!(config.kappa >= 0)) throw ConfigError("kappa must be >= 0");
  if (config.tau == 2.0) {
    warnings.emplace_back("tau=2 lies outside the interval (0, 2) covered by the Douglas-Rachford convergence result");
  }
  return warnings;
}

std::string ConvergenceTrace::csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "n,J,dist_to_ref,seconds\n";
  for (const auto& r : records) {
    out << r.n << ',' << r.criterion << ',';
    if (std::isnan(r.dist_to_ref)) {
      out << "nan";
    } else {
      out << r.dist_to_ref;
    }
    out << ',' << r.seconds << '\n';
  }
  return out.str();
}

void ConvergenceTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << csv();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace psense
