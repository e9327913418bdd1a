#include "psense/priors.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace psense {

namespace {

constexpr double kContinuedFractionThreshold = 2.0;
constexpr int kContinuedFractionTerms = 60;
constexpr double kMaxShape = 1e8;
constexpr int kBisectionSteps = 200;
constexpr int kMinFitSamples = 10;

struct SampleMoments {
  double count = 0;
  double abs_sum = 0;
  double square_sum = 0;
};

SampleMoments moments(std::span<const double> samples) {
  SampleMoments m;
  m.count = static_cast<double>(samples.size());
  for (double v : samples) {
    m.abs_sum += std::abs(v);
    m.square_sum += v * v;
  }
  return m;
}

// The GGL is an exponential family in (alpha, beta), so the log-likelihood only
// depends on sum|x| and sum x^2 and is jointly concave.
double log_likelihood(const SampleMoments& m, double alpha, double beta) {
  const double t = alpha / std::sqrt(2.0 * beta);
  return 0.5 * m.count * std::log(beta / (2.0 * std::numbers::pi)) - alpha * m.abs_sum - 0.5 * beta * m.square_sum -
         m.count * std::log(erfcx(t));
}

struct MillsTerms {
  double r = 0;          // 1 / (sqrt(pi) erfcx(t)) - t
  double one_minus = 0;  // 1 - 2 t r
};

// Evaluated from the continued fraction of erfc for large t so that neither
// quantity suffers cancellation as the density approaches the Laplace limit.
MillsTerms mills_terms(double t) {
  if (t < kContinuedFractionThreshold) {
    const double r = 1.0 / (std::sqrt(std::numbers::pi) * erfcx(t)) - t;
    return {r, 1.0 - 2.0 * t * r};
  }
  double tail = t;
  for (int k = kContinuedFractionTerms; k > 2; --k) tail = t + 0.5 * k / tail;
  const double c = 1.0 / tail;
  const double g = t + c;
  return {0.5 / g, c / g};
}

// Ratio E[x^2] / E[|x|]^2 of the density with shape t = alpha / sqrt(2 beta).
// Increases from pi/2 (Gaussian) to 2 (Laplace).
double moment_ratio(double t) {
  const MillsTerms m = mills_terms(t);
  return m.one_minus / (2.0 * m.r * m.r);
}

std::vector<double> channel(const auto& block, bool imaginary) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(block.size()));
  for (Eigen::Index r = 0; r < block.rows(); ++r) {
    for (Eigen::Index c = 0; c < block.cols(); ++c) out.push_back(imaginary ? block(r, c).imag() : block(r, c).real());
  }
  return out;
}

}  // namespace

Hyperparameters Hyperparameters::uniform(int levels, SubbandParams detail, GaussianParams re, GaussianParams im) {
  Hyperparameters h;
  h.levels = levels;
  h.details.assign(static_cast<std::size_t>(3 * levels), detail);
  h.mu_re = re.mean;
  h.sigma_re = re.sigma;
  h.mu_im = im.mean;
  h.sigma_im = im.sigma;
  return h;
}

SubbandParams& Hyperparameters::detail(int level, Orientation o) {
  if (level < 1 || level > levels) throw DimensionError("hyperparameters: level out of range");
  return details.at(static_cast<std::size_t>((level - 1) * 3 + static_cast<int>(o)));
}

const SubbandParams& Hyperparameters::detail(int level, Orientation o) const {
  if (level < 1 || level > levels) throw DimensionError("hyperparameters: level out of range");
  return details.at(static_cast<std::size_t>((level - 1) * 3 + static_cast<int>(o)));
}

void Hyperparameters::validate() const {
  if (levels < 1) throw ConfigError("hyperparameters: levels must be >= 1");
  if (details.size() != static_cast<std::size_t>(3 * levels)) {
    throw ConfigError("hyperparameters: expected " + std::to_string(3 * levels) + " detail entries, found " +
                      std::to_string(details.size()));
  }
  for (const auto& p : details) {
    if (!(p.alpha_re >= 0) || !(p.alpha_im >= 0)) throw ConfigError("hyperparameters: alpha must be >= 0");
    if (!(p.beta_re > 0) || !(p.beta_im > 0)) throw ConfigError("hyperparameters: beta must be > 0");
  }
  if (!(sigma_re > 0) || !(sigma_im > 0)) throw ConfigError("hyperparameters: sigma must be > 0");
  if (!std::isfinite(mu_re) || !std::isfinite(mu_im)) throw ConfigError("hyperparameters: mu must be finite");
}

ConvexityConstants convexity_constants(const Hyperparameters& h, Eigen::Index approximation_count) {
  ConvexityConstants c;
  const double vr = h.sigma_re * h.sigma_re;
  const double vi = h.sigma_im * h.sigma_im;
  c.vartheta0 = 0.5 * static_cast<double>(approximation_count) * (h.mu_re * h.mu_re / vr + h.mu_im * h.mu_im / vi);
  c.vartheta1 = std::min(1.0 / (2.0 * vr), 1.0 / (2.0 * vi));
  for (const auto& p : h.details) c.vartheta1 = std::min({c.vartheta1, p.beta_re, p.beta_im});
  return c;
}

double erfcx(double t) {
  if (t < kContinuedFractionThreshold) return std::exp(t * t) * std::erfc(t);
  double f = t;
  for (int k = kContinuedFractionTerms; k > 0; --k) f = t + 0.5 * k / f;
  return 1.0 / (std::sqrt(std::numbers::pi) * f);
}

double log_erfc(double t) {
  if (t < kContinuedFractionThreshold) return std::log(std::erfc(t));
  return std::log(erfcx(t)) - t * t;
}

double ggl_pdf(double xi, double alpha, double beta) {
  if (!(beta > 0)) throw ConfigError("ggl_pdf: beta must be > 0");
  if (!(alpha >= 0)) throw ConfigError("ggl_pdf: alpha must be >= 0");
  const double t = alpha / std::sqrt(2.0 * beta);
  const double log_density = 0.5 * std::log(beta / (2.0 * std::numbers::pi)) - alpha * std::abs(xi) -
                             0.5 * beta * xi * xi - std::log(erfcx(t));
  return std::exp(log_density);
}

double ggl_log_likelihood(std::span<const double> samples, double alpha, double beta) {
  if (!(beta > 0)) throw ConfigError("ggl_log_likelihood: beta must be > 0");
  return log_likelihood(moments(samples), alpha, beta);
}

GglParams fit_ggl(std::span<const double> samples) {
  if (samples.size() < static_cast<std::size_t>(kMinFitSamples)) {
    throw NumericalError("fit_ggl: need at least 10 samples, got " + std::to_string(samples.size()));
  }
  const auto [min_it, max_it] = std::minmax_element(samples.begin(), samples.end());
  if (*min_it == *max_it) throw NumericalError("fit_ggl: degenerate (constant) sample set");

  // The likelihood equations are moment matching: E|x| and E[x^2] equal their
  // sample values. Their ratio fixes the shape t, then E|x| fixes the scale.
  const SampleMoments m = moments(samples);
  const double m1 = m.abs_sum / m.count;
  const double m2 = m.square_sum / m.count;
  const double kappa = m2 / (m1 * m1);
  if (kappa <= std::numbers::pi / 2.0) return {0.0, 1.0 / m2};

  double lo = 0.0, hi = std::asinh(kMaxShape);
  for (int it = 0; it < kBisectionSteps && hi - lo > 0; ++it) {
    const double mid = 0.5 * (lo + hi);
    (moment_ratio(std::sinh(mid)) < kappa ? lo : hi) = mid;
  }
  // Past the Laplace ratio the supremum is at beta -> 0; stop at the largest shape.
  const double t = std::sinh(0.5 * (lo + hi));
  const double r = mills_terms(t).r;
  const double beta = 2.0 * r * r / (m1 * m1);
  return {t * std::sqrt(2.0 * beta), beta};
}

GaussianParams fit_gaussian(std::span<const double> samples) {
  if (samples.empty()) throw NumericalError("fit_gaussian: empty sample set");
  double mean = 0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(samples.size());
  double var = 0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(samples.size());
  return {mean, std::max(std::sqrt(var), kSigmaFloor)};
}

Hyperparameters estimate_hyperparameters(const ComplexImaged& reference, const WaveletBasis& basis, int levels) {
  const auto zeta = dwt2(reference, basis, levels);
  Hyperparameters h;
  h.levels = levels;
  h.details.resize(static_cast<std::size_t>(3 * levels));
  for (int j = 1; j <= levels; ++j) {
    for (Orientation o : kOrientations) {
      const auto block = zeta.detail(j, o);
      const auto re = channel(block, false);
      const auto im = channel(block, true);
      GglParams fr, fi;
      try {
        fr = fit_ggl(re);
        fi = fit_ggl(im);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string("estimate_hyperparameters: level ") + std::to_string(j) + " " +
                             orientation_name(o) + ": " + e.what());
      }
      h.detail(j, o) = {fr.alpha, fi.alpha, fr.beta, fi.beta};
    }
  }
  const auto approx = zeta.approximation();
  const GaussianParams gr = fit_gaussian(channel(approx, false));
  const GaussianParams gi = fit_gaussian(channel(approx, true));
  h.mu_re = gr.mean;
  h.sigma_re = gr.sigma;
  h.mu_im = gi.mean;
  h.sigma_im = gi.sigma;
  return h;
}

std::string format_hyperparameters(const Hyperparameters& h) {
  std::ostringstream out;
  out.precision(17);
  out << "# psense hyperparameters v1\n";
  out << "levels " << h.levels << '\n';
  out << "approximation mu_re " << h.mu_re << " mu_im " << h.mu_im << " sigma_re " << h.sigma_re << " sigma_im "
      << h.sigma_im << '\n';
  for (int j = 1; j <= h.levels; ++j) {
    for (Orientation o : kOrientations) {
      const auto& p = h.detail(j, o);
      out << "detail " << j << ' ' << orientation_name(o) << " alpha_re " << p.alpha_re << " alpha_im " << p.alpha_im
          << " beta_re " << p.beta_re << " beta_im " << p.beta_im << '\n';
    }
  }
  return out.str();
}

Hyperparameters parse_hyperparameters(const std::string& text) {
  Hyperparameters h;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_levels = false, have_approx = false;
  std::vector<bool> seen;

  auto expect = [&](std::istringstream& ls, const char* key) {
    std::string k;
    double v;
    if (!(ls >> k) || k != key || !(ls >> v)) {
      throw ConfigError("hyperparameters line " + std::to_string(line_no) + ": expected '" + key + " <value>'");
    }
    return v;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    if (kind == "levels") {
      if (!(ls >> h.levels) || h.levels < 1) throw ConfigError("hyperparameters line " + std::to_string(line_no) + ": bad levels");
      h.details.assign(static_cast<std::size_t>(3 * h.levels), SubbandParams{});
      seen.assign(h.details.size(), false);
      have_levels = true;
    } else if (kind == "approximation") {
      h.mu_re = expect(ls, "mu_re");
      h.mu_im = expect(ls, "mu_im");
      h.sigma_re = expect(ls, "sigma_re");
      h.sigma_im = expect(ls, "sigma_im");
      have_approx = true;
    } else if (kind == "detail") {
      if (!have_levels) throw ConfigError("hyperparameters line " + std::to_string(line_no) + ": 'levels' must come first");
      int level;
      std::string orient;
      if (!(ls >> level >> orient)) throw ConfigError("hyperparameters line " + std::to_string(line_no) + ": bad detail key");
      const Orientation o = orientation_from_name(orient);
      SubbandParams p;
      p.alpha_re = expect(ls, "alpha_re");
      p.alpha_im = expect(ls, "alpha_im");
      p.beta_re = expect(ls, "beta_re");
      p.beta_im = expect(ls, "beta_im");
      h.detail(level, o) = p;
      seen[static_cast<std::size_t>((level - 1) * 3 + static_cast<int>(o))] = true;
    } else {
      throw ConfigError("hyperparameters line " + std::to_string(line_no) + ": unknown record '" + kind + "'");
    }
  }
  if (!have_levels || !have_approx) throw ConfigError("hyperparameters: missing levels or approximation record");
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw ConfigError("hyperparameters: missing detail records");
  }
  h.validate();
  return h;
}

void write_hyperparameters(const std::filesystem::path& path, const Hyperparameters& h) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << format_hyperparameters(h);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Hyperparameters read_hyperparameters(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open hyperparameters '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_hyperparameters(text.str());
}

}  // namespace psense
