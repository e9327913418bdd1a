#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "psense/acquisition.hpp"
#include "psense/constraints.hpp"
#include "psense/core.hpp"
#include "psense/priors.hpp"
#include "psense/wavelet.hpp"

namespace psense {

enum class StartPoint { sense, zero };

/// Default step as a fraction of the admissible range (0, 1/theta).
inline constexpr double kDefaultStepFactor = 1.99 / 2.0;

struct SolverConfig {
  /// Constant step gamma; unset means kDefaultStepFactor / theta.
  std::optional<double> gamma;
  double lambda = 1.0;
  double epsilon = 1e-5;
  int max_iterations = 1000;
  /// Douglas-Rachford relaxation.
  double tau = 2.0;
  double inner_tolerance = 1e-5;
  int inner_max_iterations = 50;
  double kappa = 0.0;
  StartPoint start = StartPoint::sense;
};

/// Step size actually used for the given spectral bound.
double resolve_step(const SolverConfig& config, double theta);

/// Throws ConfigError when the step/relaxation conditions fail; returns warnings for
/// admissible but uncovered settings (tau = 2).
std::vector<std::string> check_solver_config(const SolverConfig& config, double theta);

struct TraceRecord {
  int n = 0;
  double criterion = 0.0;
  /// ||zeta^(n) - reference||, NaN when no reference was supplied.
  double dist_to_ref = 0.0;
  double seconds = 0.0;
  /// Douglas-Rachford passes in this outer iteration (0 for the unconstrained solver).
  int inner_iterations = 0;
};

struct ConvergenceTrace {
  std::vector<TraceRecord> records;
  double theta = 0.0;
  double gamma = 0.0;
  double lambda = 0.0;
  double vartheta0 = 0.0;
  double vartheta1 = 0.0;
  bool converged = false;
  std::vector<std::string> warnings;

  /// Columns n, J, dist_to_ref, seconds.
  std::string csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

template <typename Scalar>
struct Reconstruction {
  ComplexImage<Scalar> image;
  WaveletCoefficients<Scalar> coefficients;
  ConvergenceTrace trace;
};

/// Optional per-run inputs: an explicit starting point and a reference iterate for
/// distance tracking.
template <typename Scalar>
struct RunOptions {
  const WaveletCoefficients<Scalar>* initial = nullptr;
  const WaveletCoefficients<Scalar>* reference = nullptr;
};

inline constexpr double kPseudoInverseCutoff = 1e-10;

/// Basic SENSE: rho(r) = (S^H Psi^-1 S)^# S^H Psi^-1 d(r), eigenvalues below
/// kPseudoInverseCutoff * largest treated as zero.
template <typename Scalar>
ComplexImage<Scalar> sense_wls(const MultiCoilData<Scalar>& d, const AcquisitionModel<Scalar>& model) {
  model.check_data(d, "sense_wls");
  ComplexImage<Scalar> rho(model.height(), model.width());
  for (Eigen::Index y = 0; y < model.reduced_height(); ++y) {
    for (Eigen::Index x = 0; x < model.width(); ++x) {
      Eigen::SelfAdjointEigenSolver<ComplexMatrix<Scalar>> eig(model.gram(y, x));
      const auto& values = eig.eigenvalues();
      const Scalar cutoff = Scalar(kPseudoInverseCutoff) * std::max(values.cwiseAbs().maxCoeff(), Scalar(0));
      const ComplexVector<Scalar> rhs = eig.eigenvectors().adjoint() * (model.whitened_adjoint(y, x) * model.data_at(d, y, x));
      ComplexVector<Scalar> coeff(rhs.size());
      for (Eigen::Index k = 0; k < rhs.size(); ++k) {
        coeff(k) = (cutoff > 0 && values(k) > cutoff) ? rhs(k) / values(k) : Complex<Scalar>(0);
      }
      model.scatter(rho, y, x, eig.eigenvectors() * coeff);
    }
  }
  return rho;
}

/// rho(r) = rho_r(r) + (S^H Psi^-1 S + kappa I)^-1 S^H Psi^-1 (d(r) - S rho_r(r)).
template <typename Scalar, typename Derived>
ComplexImage<Scalar> tikhonov(const MultiCoilData<Scalar>& d, const AcquisitionModel<Scalar>& model, Scalar kappa,
                              const Eigen::MatrixBase<Derived>& reference) {
  model.check_data(d, "tikhonov");
  model.check_image(reference, "tikhonov reference");
  if (!(kappa >= 0) || !std::isfinite(kappa)) throw ConfigError("tikhonov: kappa must be finite and >= 0");
  ComplexImage<Scalar> rho(model.height(), model.width());
  const int R = model.reduction();
  for (Eigen::Index y = 0; y < model.reduced_height(); ++y) {
    for (Eigen::Index x = 0; x < model.width(); ++x) {
      const ComplexVector<Scalar> prior = model.stack(reference, y, x);
      const ComplexMatrix<Scalar> A = model.gram(y, x) + kappa * ComplexMatrix<Scalar>::Identity(R, R);
      const Eigen::LLT<ComplexMatrix<Scalar>> llt(A);
      const Scalar pivot = llt.matrixLLT().diagonal().real().minCoeff();
      if (llt.info() != Eigen::Success || !(pivot * pivot > Scalar(1e-14) * A.diagonal().real().maxCoeff())) {
        throw NumericalError("tikhonov: singular system at reduced position (" + std::to_string(y) + ", " +
                             std::to_string(x) + "); use kappa > 0");
      }
      const ComplexVector<Scalar> residual = model.data_at(d, y, x) - model.encoding(y, x) * prior;
      model.scatter(rho, y, x, prior + llt.solve(model.whitened_adjoint(y, x) * residual));
    }
  }
  return rho;
}

/// Constant image at the mean of the SENSE image over its support (|rho| >= fraction * max|rho|).
template <typename Derived>
auto tikhonov_reference(const Eigen::MatrixBase<Derived>& sense_image, double fraction = 0.1) {
  using Scalar = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  require_nonempty(sense_image, "tikhonov_reference");
  const Scalar peak = sense_image.cwiseAbs().maxCoeff();
  Complex<Scalar> sum(0);
  Eigen::Index count = 0;
  for (Eigen::Index y = 0; y < sense_image.rows(); ++y) {
    for (Eigen::Index x = 0; x < sense_image.cols(); ++x) {
      if (std::abs(sense_image(y, x)) >= static_cast<Scalar>(fraction) * peak) {
        sum += sense_image(y, x);
        ++count;
      }
    }
  }
  const Complex<Scalar> mean = count > 0 ? sum / static_cast<Scalar>(count) : Complex<Scalar>(0);
  return ComplexImage<Scalar>::Constant(sense_image.rows(), sense_image.cols(), mean).eval();
}

/// J_WT(zeta) = J_L(T* zeta) + J_P(zeta).
template <typename Scalar>
Scalar criterion(const WaveletCoefficients<Scalar>& zeta, const MultiCoilData<Scalar>& d,
                 const AcquisitionModel<Scalar>& model, const Hyperparameters& h, const WaveletBasis& basis) {
  return data_fidelity(idwt2(zeta, basis), d, model) + penalty(zeta, h);
}

struct DouglasRachfordStats {
  int iterations = 0;
  bool capped = false;
};

namespace detail {

template <typename Scalar>
WaveletCoefficients<Scalar> douglas_rachford(const WaveletCoefficients<Scalar>& zeta, const Hyperparameters& h,
                                             Scalar gamma, const ConstraintSet<Scalar>& c, const WaveletBasis& basis,
                                             const SolverConfig& config, DouglasRachfordStats* stats) {
  const Scalar tau = static_cast<Scalar>(config.tau);
  const Scalar tol = static_cast<Scalar>(config.inner_tolerance);
  WaveletCoefficients<Scalar> eta = zeta;
  WaveletCoefficients<Scalar> half = zeta;
  DouglasRachfordStats local;
  local.capped = true;
  for (int m = 0; m < config.inner_max_iterations; ++m) {
    half.field() = Scalar(0.5) * (eta.field() + zeta.field());
    half = project_Cstar(half, c, basis);
    WaveletCoefficients<Scalar> reflected = half;
    reflected.field() = Scalar(2) * half.field() - eta.field();
    const WaveletCoefficients<Scalar> p = prox_penalty(reflected, h, gamma);
    const ComplexImage<Scalar> step = tau * (p.field() - half.field());
    const Scalar change = step.norm();
    const Scalar scale = eta.field().norm();
    eta.field() += step;
    local.iterations = m + 1;
    if (change <= tol * scale || change == Scalar(0)) {
      local.capped = false;
      break;
    }
  }
  if (stats) *stats = local;
  return half;
}

template <typename Scalar>
void check_problem(const MultiCoilData<Scalar>& d, const AcquisitionModel<Scalar>& model, const Hyperparameters& h) {
  model.check_data(d, "reconstruct");
  h.validate();
  detail::check_levels(model.height(), model.width(), h.levels);
}

template <typename Scalar, typename Prox>
Reconstruction<Scalar> forward_backward(const MultiCoilData<Scalar>& d, const AcquisitionModel<Scalar>& model,
                                        const WaveletBasis& basis, const Hyperparameters& h,
                                        const SolverConfig& config, WaveletCoefficients<Scalar> zeta,
                                        const WaveletCoefficients<Scalar>* reference, ConvergenceTrace trace,
                                        Prox&& prox) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const Scalar gamma = static_cast<Scalar>(trace.gamma);
  const Scalar lambda = static_cast<Scalar>(config.lambda);
  const Scalar eps = static_cast<Scalar>(config.epsilon);
  if (reference && !reference->same_layout(zeta)) throw DimensionError("reference iterate layout mismatch");

  Scalar previous = 0;  // J^(0)
  for (int n = 1;; ++n) {
    const ComplexImage<Scalar> rho = idwt2(zeta, basis);
    ComplexImage<Scalar> u;
    const Scalar value = data_fidelity(rho, d, model, &u) + penalty(zeta, h);
    if (!std::isfinite(value)) {
      throw NumericalError("criterion became non-finite at iteration " + std::to_string(n) +
                           "; check the step size against the spectral bound");
    }
    const WaveletCoefficients<Scalar> upsilon = dwt2(u, basis, zeta.levels());
    WaveletCoefficients<Scalar> forward_point = zeta;
    forward_point.field() -= gamma * upsilon.field();
    int inner = 0;
    const WaveletCoefficients<Scalar> p = prox(forward_point, gamma, inner);
    TraceRecord record;
    record.n = n;
    record.criterion = static_cast<double>(value);
    record.dist_to_ref = reference ? static_cast<double>((zeta.field() - reference->field()).norm())
                                   : std::numeric_limits<double>::quiet_NaN();
    record.inner_iterations = inner;
    zeta.field() += lambda * (p.field() - zeta.field());
    record.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    trace.records.push_back(record);

    if (std::abs(value - previous) <= eps * value) {
      trace.converged = true;
      break;
    }
    if (n >= config.max_iterations) {
      trace.warnings.push_back("iteration cap " + std::to_string(config.max_iterations) +
                               " reached before the stopping rule was met");
      break;
    }
    previous = value;
  }
  Reconstruction<Scalar> out;
  out.image = idwt2(zeta, basis);
  out.coefficients = std::move(zeta);
  out.trace = std::move(trace);
  return out;
}

template <typename Scalar>
ConvergenceTrace start_trace(const AcquisitionModel<Scalar>& model, const Hyperparameters& h,
                             const SolverConfig& config) {
  ConvergenceTrace trace;
  trace.theta = static_cast<double>(spectral_bound(model));
  trace.warnings = check_solver_config(config, trace.theta);
  trace.gamma = resolve_step(config, trace.theta);
  trace.lambda = config.lambda;
  const auto k = (model.height() >> h.levels) * (model.width() >> h.levels);
  const ConvexityConstants cc = convexity_constants(h, k);
  trace.vartheta0 = cc.vartheta0;
  trace.vartheta1 = cc.vartheta1;
  return trace;
}

}  // namespace detail

/// prox_{gamma J_P + i_C*}(zeta) by Douglas-Rachford, started at eta^(0) = zeta. Stops when
/// ||eta^(m+1) - eta^(m)|| <= inner_tolerance ||eta^(m)|| or at the cap; returns the last
/// half step, which lies in C*.
template <typename Scalar>
WaveletCoefficients<Scalar> dr_prox(const WaveletCoefficients<Scalar>& zeta, const Hyperparameters& h, Scalar gamma,
                                    const ConstraintSet<Scalar>& c, const WaveletBasis& basis,
                                    const SolverConfig& config, DouglasRachfordStats* stats = nullptr) {
  if (!(gamma > 0)) throw ConfigError("dr_prox: gamma must be > 0");
  if (!(config.tau > 0 && config.tau <= 2)) throw ConfigError("dr_prox: tau must lie in (0, 2]");
  if (config.inner_max_iterations < 1) throw ConfigError("dr_prox: inner iteration cap must be >= 1");
  if (c.height() != zeta.height() || c.width() != zeta.width()) throw DimensionError("dr_prox: constraint set shape mismatch");
  c.validate();
  return detail::douglas_rachford(zeta, h, gamma, c, basis, config, stats);
}

/// Wavelet-regularized reconstruction by relaxed forward-backward iterations.
template <typename Scalar>
Reconstruction<Scalar> fb_reconstruct(const MultiCoilData<Scalar>& d, const AcquisitionModel<Scalar>& model,
                                      const WaveletBasis& basis, const Hyperparameters& h,
                                      const SolverConfig& config = {}, RunOptions<Scalar> options = {}) {
  detail::check_problem(d, model, h);
  ConvergenceTrace trace = detail::start_trace(model, h, config);
  WaveletCoefficients<Scalar> zeta;
  if (options.initial) {
    zeta = *options.initial;
  } else if (config.start == StartPoint::sense) {
    zeta = dwt2(sense_wls(d, model), basis, h.levels);
  } else {
    zeta = WaveletCoefficients<Scalar>::zeros(model.height(), model.width(), h.levels);
  }
  if (zeta.height() != model.height() || zeta.width() != model.width() || zeta.levels() != h.levels) {
    throw DimensionError("fb_reconstruct: initial iterate layout mismatch");
  }
  return detail::forward_backward(d, model, basis, h, config, std::move(zeta), options.reference, std::move(trace),
                                  [&](const WaveletCoefficients<Scalar>& x, Scalar gamma, int&) {
                                    return prox_penalty(x, h, gamma);
                                  });
}

/// Constrained reconstruction: forward-backward with the prox replaced by dr_prox started
/// at the forward point. The returned image is clamped onto C.
template <typename Scalar>
Reconstruction<Scalar> cwt_reconstruct(const MultiCoilData<Scalar>& d, const AcquisitionModel<Scalar>& model,
                                       const WaveletBasis& basis, const Hyperparameters& h,
                                       const ConstraintSet<Scalar>& c, const SolverConfig& config = {},
                                       RunOptions<Scalar> options = {}) {
  detail::check_problem(d, model, h);
  if (c.height() != model.height() || c.width() != model.width()) {
    throw DimensionError("cwt_reconstruct: constraint set shape mismatch");
  }
  c.validate();
  ConvergenceTrace trace = detail::start_trace(model, h, config);
  ComplexImage<Scalar> start_image;
  if (options.initial) {
    start_image = idwt2(*options.initial, basis);
  } else if (config.start == StartPoint::sense) {
    start_image = sense_wls(d, model);
  } else {
    start_image = ComplexImage<Scalar>::Zero(model.height(), model.width());
  }
  model.check_image(start_image, "cwt_reconstruct initial iterate");
  WaveletCoefficients<Scalar> zeta = dwt2(project_C(start_image, c), basis, h.levels);

  int capped = 0;
  auto result = detail::forward_backward(
      d, model, basis, h, config, std::move(zeta), options.reference, std::move(trace),
      [&](const WaveletCoefficients<Scalar>& x, Scalar gamma, int& inner) {
        DouglasRachfordStats stats;
        auto out = detail::douglas_rachford(x, h, gamma, c, basis, config, &stats);
        inner = stats.iterations;
        if (stats.capped) ++capped;
        return out;
      });
  if (capped > 0) {
    result.trace.warnings.push_back("Douglas-Rachford cap M=" + std::to_string(config.inner_max_iterations) +
                                    " bound in " + std::to_string(capped) + " outer iteration(s)");
  }
  result.image = project_C(result.image, c);
  return result;
}

/// Runs `fn` on every slice with up to `workers` threads. Each slice is handled by one
/// thread start to finish, so outputs do not depend on the worker count.
template <typename Input, typename Fn>
auto reconstruct_slices(const std::vector<Input>& slices, int workers, Fn fn) {
  using Output = decltype(fn(slices.front()));
  if (workers < 1) throw ConfigError("reconstruct_slices: workers must be >= 1");
  std::vector<std::optional<Output>> results(slices.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < slices.size(); i = next++) {
      try {
        results[i].emplace(fn(slices[i]));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const auto count = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(workers), slices.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < count; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  std::vector<Output> out;
  out.reserve(slices.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

}  // namespace psense
