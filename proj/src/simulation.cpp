#include "psense/simulation.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace psense {

namespace {

struct Ellipse {
  double intensity, semi_x, semi_y, centre_x, centre_y, angle_deg;
};

// Modified Shepp-Logan head (higher-contrast variant), unit square coordinates.
constexpr std::array<Ellipse, 10> kSheppLogan = {{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
}};

// Pixel centre in [-1, 1]^2 with v pointing up.
std::pair<double, double> unit_coords(int row, int col, int height, int width) {
  const double u = (2.0 * col + 1.0) / width - 1.0;
  const double v = 1.0 - (2.0 * row + 1.0) / height;
  return {u, v};
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, int line) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  std::from_chars_result res;
  if constexpr (std::is_floating_point_v<T>) {
    res = std::from_chars(first, last, out, std::chars_format::general);
  } else {
    res = std::from_chars(first, last, out);
  }
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("line " + std::to_string(line) + ": invalid value '" + value + "' for '" + key + "'");
  }
  return out;
}

}  // namespace

const char* phantom_name(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::shepp_logan: return "shepp-logan";
    case PhantomKind::checker: return "checker";
    case PhantomKind::flat: return "flat";
  }
  return "?";
}

void SimulationConfig::validate() const {
  if (height < 1) throw ConfigError("height: must be >= 1");
  if (width < 1) throw ConfigError("width: must be >= 1");
  if (coils < 1) throw ConfigError("coils: must be >= 1");
  if (reduction < 1) throw ConfigError("reduction: must be >= 1");
  if (height % reduction != 0) {
    throw ConfigError("reduction: R=" + std::to_string(reduction) + " does not divide height=" + std::to_string(height));
  }
  if (coils < reduction) {
    throw ConfigError("coils: L=" + std::to_string(coils) + " is smaller than reduction R=" + std::to_string(reduction));
  }
  if (!(sigma_n >= 0) || !std::isfinite(sigma_n)) throw ConfigError("sigma_n: must be finite and >= 0");
  if (!(coil_scale > 0)) throw ConfigError("coil_scale: must be > 0");
  if (!(map_error >= 0)) throw ConfigError("map_error: must be >= 0");
  if (!std::isfinite(phantom_phase)) throw ConfigError("phantom_phase: must be finite");
  if (levels < 0) throw ConfigError("levels: must be >= 0");
  if (levels > 0) {
    const int m = 1 << levels;
    if (height % m != 0 || width % m != 0) {
      throw ConfigError("levels: image " + std::to_string(height) + "x" + std::to_string(width) +
                        " is not divisible by 2^" + std::to_string(levels));
    }
  }
}

SimulationConfig parse_simulation_config(const std::string& text) {
  SimulationConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    raw = trim(raw);
    if (raw.empty()) continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
    const std::string key = trim(raw.substr(0, eq));
    const std::string value = trim(raw.substr(eq + 1));
    if (value.empty()) throw ConfigError("line " + std::to_string(line) + ": empty value for '" + key + "'");

    if (key == "phantom") {
      if (value == "shepp-logan") cfg.phantom = PhantomKind::shepp_logan;
      else if (value == "checker") cfg.phantom = PhantomKind::checker;
      else if (value == "flat") cfg.phantom = PhantomKind::flat;
      else throw ConfigError("line " + std::to_string(line) + ": unknown phantom '" + value + "'");
    } else if (key == "height") {
      cfg.height = parse_number<int>(key, value, line);
    } else if (key == "width") {
      cfg.width = parse_number<int>(key, value, line);
    } else if (key == "coils") {
      cfg.coils = parse_number<int>(key, value, line);
    } else if (key == "reduction") {
      cfg.reduction = parse_number<int>(key, value, line);
    } else if (key == "sigma_n") {
      cfg.sigma_n = parse_number<double>(key, value, line);
    } else if (key == "coil_scale") {
      cfg.coil_scale = parse_number<double>(key, value, line);
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, value, line);
    } else if (key == "phantom_phase") {
      cfg.phantom_phase = parse_number<double>(key, value, line);
    } else if (key == "map_error") {
      cfg.map_error = parse_number<double>(key, value, line);
    } else if (key == "levels") {
      cfg.levels = parse_number<int>(key, value, line);
    } else if (key == "covariance") {
      if (value == "overlap") cfg.covariance = CovarianceModel::sensitivity_overlap;
      else if (value == "identity") cfg.covariance = CovarianceModel::identity;
      else throw ConfigError("line " + std::to_string(line) + ": covariance must be 'overlap' or 'identity'");
    } else {
      throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

SimulationConfig load_simulation_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_simulation_config(text.str());
}

std::string format_simulation_config(const SimulationConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "phantom = " << phantom_name(c.phantom) << '\n'
      << "height = " << c.height << '\n'
      << "width = " << c.width << '\n'
      << "coils = " << c.coils << '\n'
      << "reduction = " << c.reduction << '\n'
      << "sigma_n = " << c.sigma_n << '\n'
      << "coil_scale = " << c.coil_scale << '\n'
      << "seed = " << c.seed << '\n'
      << "phantom_phase = " << c.phantom_phase << '\n'
      << "map_error = " << c.map_error << '\n'
      << "covariance = " << (c.covariance == CovarianceModel::identity ? "identity" : "overlap") << '\n'
      << "levels = " << c.levels << '\n';
  return out.str();
}

RealImaged make_phantom(PhantomKind kind, int height, int width) {
  RealImaged img = RealImaged::Zero(height, width);
  switch (kind) {
    case PhantomKind::flat:
      img.setConstant(128.0);
      break;
    case PhantomKind::checker: {
      const int block = std::max(1, std::min(height, width) / 8);
      for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) img(r, c) = ((r / block + c / block) % 2 == 0) ? 200.0 : 50.0;
      }
      break;
    }
    case PhantomKind::shepp_logan:
      for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
          const auto [u, v] = unit_coords(r, c, height, width);
          double value = 0;
          for (const auto& e : kSheppLogan) {
            const double phi = e.angle_deg * std::numbers::pi / 180.0;
            const double du = u - e.centre_x;
            const double dv = v - e.centre_y;
            const double a = (du * std::cos(phi) + dv * std::sin(phi)) / e.semi_x;
            const double b = (-du * std::sin(phi) + dv * std::cos(phi)) / e.semi_y;
            if (a * a + b * b <= 1.0) value += e.intensity;
          }
          img(r, c) = std::clamp(255.0 * value, 0.0, 255.0);
        }
      }
      break;
  }
  return img;
}

SensitivityMaps<double> make_coil_maps(int coils, int height, int width, double scale) {
  SensitivityMaps<double> out;
  out.maps.reserve(static_cast<std::size_t>(coils));
  const double cy = 0.5 * height;
  const double cx = 0.5 * width;
  for (int l = 0; l < coils; ++l) {
    const double angle = 2.0 * std::numbers::pi * l / coils;
    // Coil centres sit on an ellipse just outside the object.
    const double py = cy - 0.6 * height * std::cos(angle);
    const double px = cx + 0.6 * width * std::sin(angle);
    ComplexImaged map(height, width);
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        const auto [u, v] = unit_coords(r, c, height, width);
        const double dy = (r + 0.5) - py;
        const double dx = (c + 0.5) - px;
        const double decay = std::exp(-(dx * dx + dy * dy) / (2.0 * scale * scale));
        const double modulation = 1.0 + 0.15 * (u * std::sin(angle) + v * std::cos(angle)) + 0.05 * u * v;
        const double phase = angle + 0.8 * (u * std::cos(angle) - v * std::sin(angle));
        map(r, c) = std::polar(decay * modulation, phase);
      }
    }
    out.maps.push_back(std::move(map));
  }
  return out;
}

std::uint64_t position_seed(std::uint64_t seed, std::uint64_t position) {
  return splitmix64(splitmix64(seed) ^ (position * 0xD1B54A32D192ED03ULL + 0x2545F4914F6CDD1DULL));
}

MultiCoilData<double> sample_noise(const NoiseCovariance<double>& noise, int reduction, Eigen::Index reduced_height,
                                   Eigen::Index width, std::uint64_t seed) {
  const int L = noise.coil_count();
  MultiCoilData<double> out;
  out.reduction = reduction;
  out.coils.assign(static_cast<std::size_t>(L), ComplexImaged::Zero(reduced_height, width));
  // n = F (a + i b), F F^H = Psi / 2, a and b standard normal: E[n n^H] = Psi.
  Eigen::SelfAdjointEigenSolver<ComplexMatrix<double>> eig(0.5 * noise.psi);
  const ComplexMatrix<double> factor = eig.operatorSqrt();
  for (Eigen::Index y = 0; y < reduced_height; ++y) {
    for (Eigen::Index x = 0; x < width; ++x) {
      std::mt19937_64 rng(position_seed(seed, static_cast<std::uint64_t>(y * width + x)));
      std::normal_distribution<double> normal(0.0, 1.0);
      ComplexVector<double> z(L);
      for (int l = 0; l < L; ++l) {
        const double a = normal(rng);
        const double b = normal(rng);
        z(l) = {a, b};
      }
      const ComplexVector<double> n = factor * z;
      for (int l = 0; l < L; ++l) out.coils[static_cast<std::size_t>(l)](y, x) = n(l);
    }
  }
  return out;
}

Simulation simulate(const SimulationConfig& config) {
  config.validate();
  Simulation sim;

  const RealImaged magnitude = make_phantom(config.phantom, config.height, config.width);
  sim.reference.resize(config.height, config.width);
  for (int r = 0; r < config.height; ++r) {
    for (int c = 0; c < config.width; ++c) {
      const auto [u, v] = unit_coords(r, c, config.height, config.width);
      const double phase = config.phantom_phase * (0.5 * u + 0.3 * v + 0.2 * u * v);
      sim.reference(r, c) = config.phantom_phase == 0.0 ? Complex<double>(magnitude(r, c), 0.0)
                                                        : std::polar(magnitude(r, c), phase);
    }
  }

  sim.true_maps = make_coil_maps(config.coils, config.height, config.width, config.coil_scale);

  // A noiseless run still needs an invertible weighting: use the unit-deviation structure.
  const double sigma_for_psi = config.sigma_n > 0 ? config.sigma_n : 1.0;
  sim.noise = build_covariance(sim.true_maps, sigma_for_psi, config.covariance);
  sim.noise.sigma_n = config.sigma_n;

  sim.maps = sim.true_maps;
  if (config.map_error > 0) {
    std::mt19937_64 rng(position_seed(config.seed ^ 0x6D61702D6572726FULL, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& map : sim.maps.maps) {
      std::array<double, 5> k{};
      for (double& v : k) v = normal(rng);
      for (int r = 0; r < config.height; ++r) {
        for (int c = 0; c < config.width; ++c) {
          const auto [u, v] = unit_coords(r, c, config.height, config.width);
          const Complex<double> factor(1.0 + config.map_error * (k[0] * u + k[1] * v + k[2] * u * v),
                                       config.map_error * (k[3] * u + k[4] * v));
          map(r, c) *= factor;
        }
      }
    }
  }

  const AcquisitionModel<double> acquisition(sim.true_maps, sim.noise, config.reduction);
  sim.data = forward(sim.reference, acquisition);
  if (config.sigma_n > 0) {
    const MultiCoilData<double> n =
        sample_noise(sim.noise, config.reduction, acquisition.reduced_height(), config.width, config.seed);
    for (std::size_t l = 0; l < sim.data.coils.size(); ++l) sim.data.coils[l] += n.coils[l];
  }
  return sim;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace psense
