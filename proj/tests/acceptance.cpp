// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "oracles.hpp"
#include "psense/acquisition.hpp"
#include "psense/constraints.hpp"
#include "psense/metrics.hpp"
#include "psense/priors.hpp"
#include "psense/simulation.hpp"
#include "psense/solvers.hpp"
#include "support.hpp"

using namespace psense;
using psense::testing::random_image;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

// ------------------------------------------------------------------ 1

void wavelet_correctness(Outcome& out) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  double worst_pr = 0, worst_adj = 0, worst_parseval = 0;
  for (const char* name : {"haar", "db8", "sym8"}) {
    const WaveletBasis b = WaveletBasis::from_name(name);
    for (int levels = 1; levels <= 3; ++levels) {
      for (int k = 0; k < 100; ++k) {
        const ComplexImaged x = random_image(64, 64, rng);
        const WaveletCoefficients<double> w(random_image(64, 64, rng), levels);
        const auto tx = dwt2(x, b, levels);
        worst_pr = std::max(worst_pr, (idwt2(tx, b) - x).cwiseAbs().maxCoeff());
        const Complex<double> lhs = tx.field().cwiseProduct(w.field().conjugate()).sum();
        const Complex<double> rhs = x.cwiseProduct(idwt2(w, b).conjugate()).sum();
        worst_adj = std::max(worst_adj, std::abs(lhs - rhs));
        worst_parseval = std::max(worst_parseval, std::abs(tx.field().squaredNorm() / x.squaredNorm() - 1.0));
      }
    }
  }
  const double elapsed = seconds_since(t0);
  out.detail << "max PR error " << worst_pr << ", adjoint error " << worst_adj << ", |Parseval-1| " << worst_parseval
             << ", " << elapsed << " s";
  out.require(worst_pr < 1e-10, "perfect reconstruction");
  out.require(worst_adj < 1e-10, "adjoint identity");
  out.require(worst_parseval < 1e-10, "Parseval");
  out.require(elapsed < 10.0, "runtime < 10 s");
}

// ------------------------------------------------------------------ 2

void prox_oracle(Outcome& out) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> xi_d(-20.0, 20.0), mu_d(-5.0, 5.0), ab_d(0.0, 5.0), g_d(1e-3, 5.0);
  double worst = 0;
  for (int k = 0; k < 1000; ++k) {
    const double xi = xi_d(rng), alpha = ab_d(rng), beta = ab_d(rng), mu = mu_d(rng), gamma = g_d(rng);
    const double ref = oracle::prox_by_search(xi, alpha, beta, mu, gamma);
    worst = std::max(worst, std::abs(prox_scalar(xi, alpha, beta, mu, gamma) - ref));
  }
  const double elapsed = seconds_since(t0);
  out.detail << "max |prox - search| " << worst << ", " << elapsed << " s";
  out.require(worst < 1e-6, "tolerance 1e-6");
  out.require(elapsed < 5.0, "runtime < 5 s");
}

// ------------------------------------------------------------------ 3

void gradient_check(Outcome& out) {
  std::mt19937_64 rng(1003);
  double worst = 0;
  for (int k = 0; k < 5; ++k) {
    const auto model = psense::testing::random_model(4, 2, 16, 16, rng);
    const auto d = psense::testing::random_data(model, rng);
    const ComplexImaged rho = random_image(16, 16, rng);
    const ComplexImaged dir = random_image(16, 16, rng);
    const double h = 1e-6;
    const double fd = (data_fidelity(ComplexImaged(rho + h * dir), d, model) -
                       data_fidelity(ComplexImaged(rho - h * dir), d, model)) /
                      (2 * h);
    const double analytic = real_inner(gradient_JL(rho, d, model), dir);
    worst = std::max(worst, std::abs(fd - analytic) / std::abs(analytic));
  }
  out.detail << "max relative directional-derivative error " << worst;
  out.require(worst < 1e-4, "tolerance 1e-4");
}

// ------------------------------------------------------------------ 4

void solver_equivalences(Outcome& out) {
  SimulationConfig cfg;
  cfg.height = 64;
  cfg.width = 64;
  cfg.coils = 8;
  cfg.reduction = 4;
  cfg.sigma_n = 2.0;
  cfg.seed = 11;
  const Simulation s = simulate(cfg);
  const AcquisitionModel<double> model(s.maps, s.noise, cfg.reduction);
  const ComplexImaged sense = sense_wls(s.data, model);
  const double tk_gap = (tikhonov(s.data, model, 0.0, tikhonov_reference(sense)) - sense).cwiseAbs().maxCoeff();

  const WaveletBasis b = WaveletBasis::from_name("sym8");
  const Hyperparameters h = estimate_hyperparameters(s.reference, b, 3);
  const auto wt = fb_reconstruct(s.data, model, b, h);
  const auto cwt = cwt_reconstruct(s.data, model, b, h, ConstraintSet<double>::unconstrained(64, 64));
  const double jw = criterion(wt.coefficients, s.data, model, h, b);
  const double jc = criterion(cwt.coefficients, s.data, model, h, b);
  const double jgap = std::abs(jc - jw) / std::abs(jw);

  cfg.sigma_n = 0.0;
  cfg.reduction = 2;
  const Simulation clean = simulate(cfg);
  const AcquisitionModel<double> clean_model(clean.maps, clean.noise, cfg.reduction);
  const double clean_snr = snr_db(clean.reference, sense_wls(clean.data, clean_model));

  out.detail << "|tikhonov(0) - sense| " << tk_gap << ", cwt/wt criterion gap " << jgap << ", noiseless SENSE "
             << clean_snr << " dB";
  out.require(tk_gap < 1e-10, "tikhonov(kappa=0) = sense");
  out.require(jgap < 1e-4, "unbounded cwt = wt");
  out.require(clean_snr > 80.0, "noiseless SENSE > 80 dB");
}

// ------------------------------------------------------------------ 5

void convergence_guarantees(Outcome& out) {
  const auto t0 = Clock::now();
  SimulationConfig cfg;
  cfg.height = 16;
  cfg.width = 16;
  cfg.coils = 4;
  cfg.reduction = 2;
  cfg.sigma_n = 1.0;
  cfg.seed = 5;
  const Simulation s = simulate(cfg);
  const AcquisitionModel<double> model(s.maps, s.noise, cfg.reduction);
  const WaveletBasis b = WaveletBasis::from_name("sym8");
  const Hyperparameters h = Hyperparameters::uniform(2, {0.5, 0.5, 0.01, 0.01}, {0.0, 10.0}, {0.0, 10.0});
  const double theta = spectral_bound(model);

  SolverConfig cfg_ref;
  cfg_ref.gamma = 1.0 / (2.0 * theta);
  cfg_ref.lambda = 1.0;
  cfg_ref.epsilon = 1e-12;
  cfg_ref.max_iterations = 1000000;
  const auto ref = fb_reconstruct(s.data, model, b, h, cfg_ref);

  SolverConfig cfg_run = cfg_ref;
  cfg_run.epsilon = 1e-8;
  const auto run = fb_reconstruct(s.data, model, b, h, cfg_run, {nullptr, &ref.coefficients});

  int increases = 0;
  double worst_rise = 0;
  for (std::size_t n = 1; n < run.trace.records.size(); ++n) {
    const double prev = run.trace.records[n - 1].criterion;
    const double rise = run.trace.records[n].criterion - prev;
    if (rise > 0) {
      ++increases;
      worst_rise = std::max(worst_rise, rise / std::abs(prev));
    }
  }
  const RateCheck rate = rate_bound(run.trace, run.trace.gamma, run.trace.lambda, run.trace.vartheta1);

  SolverConfig cfg_zero = cfg_ref;
  cfg_zero.start = StartPoint::zero;
  const auto other = fb_reconstruct(s.data, model, b, h, cfg_zero);
  const double dist = (other.coefficients.field() - ref.coefficients.field()).norm();
  const double jgap = std::abs(criterion(other.coefficients, s.data, model, h, b) -
                               criterion(ref.coefficients, s.data, model, h, b)) /
                      std::abs(criterion(ref.coefficients, s.data, model, h, b));
  const double elapsed = seconds_since(t0);

  out.detail << run.trace.records.size() << " iterations, " << increases << " increases (max rel " << worst_rise
             << "), rate bound margin " << rate.margin << " (vartheta1 " << run.trace.vartheta1
             << "), two-start distance " << dist << ", criterion gap " << jgap << ", " << elapsed << " s";
  out.require(increases == 0, "monotone criterion");
  out.require(rate.pass, "linear-rate bound");
  out.require(dist < 1e-3, "two starts within 1e-3");
  out.require(jgap < 1e-6, "two starts criterion within 1e-6");
  out.require(elapsed < 60.0, "runtime < 60 s");
}

// ------------------------------------------------------------------ 6

void douglas_rachford_inner(Outcome& out) {
  std::mt19937_64 rng(1006);
  const WaveletBasis b = WaveletBasis::from_name("haar");
  const WaveletCoefficients<double> x(random_image(4, 4, rng, 3.0), 1);
  const Hyperparameters h = Hyperparameters::uniform(1, {0.5, 0.3, 0.5, 1.0}, {1.0, 2.0}, {-0.5, 1.0});
  auto c = ConstraintSet<double>::unconstrained(4, 4);
  for (Eigen::Index y = 0; y < 4; ++y) {
    for (Eigen::Index xx = 0; xx < 4; ++xx) {
      if ((y + xx) % 2 == 1) continue;
      c.lo_re(y, xx) = -0.25;
      c.hi_re(y, xx) = 0.75;
      c.lo_im(y, xx) = -1.0;
      c.hi_im(y, xx) = 0.0;
      c.active(y, xx) = true;
    }
  }
  const double gamma = 0.8;
  SolverConfig cfg;
  cfg.tau = 1.5;
  cfg.inner_tolerance = 1e-12;
  cfg.inner_max_iterations = 100000;
  DouglasRachfordStats stats;
  const auto dr = dr_prox(x, h, gamma, c, b, cfg, &stats);
  const auto ref = oracle::constrained_prox(x, h, gamma, c, b, 1e-10, 1000000);
  const double gap = (dr.field() - ref.zeta.field()).cwiseAbs().maxCoeff();
  const double unconstrained_gap = (prox_penalty(x, h, gamma).field() - ref.zeta.field()).cwiseAbs().maxCoeff();

  // Full constrained reconstruction on a 4x4 Haar instance.
  const auto model = psense::testing::random_model(2, 2, 4, 4, rng);
  const ComplexImaged truth = random_image(4, 4, rng, 2.0);
  MultiCoilData<double> d = forward(truth, model);
  const auto noise = psense::testing::random_data(model, rng);
  for (std::size_t l = 0; l < d.coils.size(); ++l) d.coils[l] += 0.3 * noise.coils[l];
  const ComplexImaged sense = sense_wls(d, model);
  const auto box = build_bounds(sense, detect_artifacts(sense, 1, 0.5), 1);
  const auto rec = cwt_reconstruct(d, model, b, h, box);
  const double violation = max_violation(rec.image, box);

  out.detail << "max |dr_prox - oracle| " << gap << " (" << stats.iterations << " DR passes, oracle "
             << ref.iterations << " iterations; plain prox differs by " << unconstrained_gap
             << "), cwt violation " << violation << " on " << box.active.count() << " active pixels";
  out.require(gap < 1e-4, "dr_prox within 1e-4 of the oracle");
  out.require(violation == 0.0, "zero constraint violation");
}

// ------------------------------------------------------------------ 7

void synthetic_study(Outcome& out) {
  const auto t0 = Clock::now();
  SimulationConfig cfg;
  cfg.height = 64;
  cfg.width = 64;
  cfg.coils = 8;
  cfg.reduction = 4;
  cfg.sigma_n = 2.0;
  cfg.seed = 7;
  const Simulation s = simulate(cfg);
  const AcquisitionModel<double> model(s.maps, s.noise, cfg.reduction);
  const WaveletBasis b = WaveletBasis::from_name("sym8");
  const Hyperparameters h = estimate_hyperparameters(s.reference, b, 3);

  const ComplexImaged sense = sense_wls(s.data, model);
  const double theta = spectral_bound(model);
  const ComplexImaged tk = tikhonov(s.data, model, 0.01 * theta, tikhonov_reference(sense));
  const auto wt = fb_reconstruct(s.data, model, b, h);
  const auto c = build_bounds(sense, detect_artifacts(sense, 1, 0.9), 1);
  const auto cwt = cwt_reconstruct(s.data, model, b, h, c);

  const double snr_sense = snr_db(s.reference, sense);
  const double snr_tk = snr_db(s.reference, tk);
  const double snr_wt = snr_db(s.reference, wt.image);
  const double snr_cwt = snr_db(s.reference, cwt.image);
  const double elapsed = seconds_since(t0);
  out.detail << "SNR sense " << snr_sense << ", tikhonov " << snr_tk << ", wt " << snr_wt << ", cwt " << snr_cwt
             << " dB; cwt-wt " << snr_cwt - snr_wt << " dB, cwt-sense " << snr_cwt - snr_sense << " dB; "
             << elapsed << " s";
  out.require(snr_sense >= 10.0 && snr_sense <= 15.0, "SENSE SNR in 10-15 dB");
  out.require(snr_wt > snr_sense, "wt > sense");
  out.require(snr_cwt >= snr_wt, "cwt >= wt");
  out.require(snr_cwt - snr_sense >= 0.3, "cwt - sense >= 0.3 dB");
  out.require(elapsed < 300.0, "runtime < 5 min");
}

// ------------------------------------------------------------------ 8

void performance_envelope(Outcome& out) {
  SimulationConfig cfg;
  cfg.height = 256;
  cfg.width = 256;
  cfg.coils = 8;
  cfg.reduction = 2;
  cfg.sigma_n = 2.0;
  cfg.coil_scale = 64.0;
  const Simulation s = simulate(cfg);
  const AcquisitionModel<double> model(s.maps, s.noise, cfg.reduction);
  const WaveletBasis b = WaveletBasis::from_name("sym8");
  const Hyperparameters h = estimate_hyperparameters(s.reference, b, 3);
  SolverConfig fixed;
  fixed.epsilon = 1e-15;
  fixed.max_iterations = 20;
  auto t0 = Clock::now();
  const auto big = fb_reconstruct(s.data, model, b, h, fixed);
  const double single = seconds_since(t0);

  cfg.height = 128;
  cfg.width = 128;
  cfg.coil_scale = 32.0;
  std::vector<MultiCoilData<double>> slices;
  Simulation first;
  for (int k = 0; k < 8; ++k) {
    cfg.seed = 100 + static_cast<std::uint64_t>(k);
    Simulation sk = simulate(cfg);
    slices.push_back(sk.data);
    if (k == 0) first = std::move(sk);
  }
  const AcquisitionModel<double> slice_model(first.maps, first.noise, cfg.reduction);
  const Hyperparameters hs = estimate_hyperparameters(first.reference, b, 3);
  auto fn = [&](const MultiCoilData<double>& d) { return fb_reconstruct(d, slice_model, b, hs, fixed).image; };
  t0 = Clock::now();
  const auto serial = reconstruct_slices(slices, 1, fn);
  const double t_serial = seconds_since(t0);
  t0 = Clock::now();
  const auto parallel = reconstruct_slices(slices, 8, fn);
  const double t_parallel = seconds_since(t0);
  bool identical = serial.size() == parallel.size();
  for (std::size_t k = 0; identical && k < serial.size(); ++k) identical = serial[k] == parallel[k];
  const double speedup = t_serial / t_parallel;

  out.detail << "256x256 x " << big.trace.records.size() << " iterations " << single << " s; 8 slices "
             << t_serial << " s serial, " << t_parallel << " s with 8 workers (speedup " << speedup << ", "
             << std::thread::hardware_concurrency() << " hardware threads); outputs "
             << (identical ? "bit-identical" : "DIFFER");
  out.require(big.trace.records.size() == 20, "20 iterations run");
  out.require(single < 60.0, "256x256 in < 60 s");
  out.require(speedup >= 3.0, "speedup >= 3 at 8 workers");
  out.require(identical, "bit-identical slices");
}

// ------------------------------------------------------------------ 9

void noise_model(Outcome& out) {
  const auto maps = make_coil_maps(8, 64, 64, 16.0);
  const auto cov = build_covariance(maps, 2.0);
  const auto n = sample_noise(cov, 1, 100, 1000, 2024);
  const int L = 8;
  ComplexMatrix<double> emp = ComplexMatrix<double>::Zero(L, L);
  const Eigen::Index draws = n.coils[0].size();
  ComplexVector<double> v(L);
  for (Eigen::Index i = 0; i < draws; ++i) {
    for (int l = 0; l < L; ++l) v(l) = n.coils[static_cast<std::size_t>(l)].data()[i];
    emp.noalias() += v * v.adjoint();
  }
  emp /= static_cast<double>(draws);
  double worst = 0;
  for (int a = 0; a < L; ++a) {
    for (int c = 0; c < L; ++c) {
      const double scale = std::sqrt(cov.psi(a, a).real() * cov.psi(c, c).real());
      worst = std::max(worst, std::abs(emp(a, c) - cov.psi(a, c)) / scale);
    }
  }

  SensitivityMaps<double> hand;
  ComplexImaged s1(1, 2), s2(1, 2);
  s1 << 1, 0;
  s2 << 1, 1;
  hand.maps = {s1, s2};
  const auto hc = build_covariance(hand, 1.0);
  const bool exact = hc.psi(0, 1) == Complex<double>(1.0 / std::sqrt(2.0)) &&
                     hc.psi(1, 0) == Complex<double>(1.0 / std::sqrt(2.0)) && hc.psi(0, 0) == Complex<double>(1.0) &&
                     hc.psi(1, 1) == Complex<double>(1.0);

  out.detail << draws << " draws, max |emp - Psi| / sqrt(Psi_aa Psi_bb) " << worst << "; hand example off-diagonal "
             << hc.psi(0, 1).real();
  out.require(worst < 0.03, "entrywise within 3%");
  out.require(exact, "hand example exact");
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<void(Outcome&)>> criteria[] = {
      {"wavelet correctness", wavelet_correctness},
      {"prox oracle", prox_oracle},
      {"gradient check", gradient_check},
      {"solver equivalences", solver_equivalences},
      {"convergence guarantees", convergence_guarantees},
      {"Douglas-Rachford inner correctness", douglas_rachford_inner},
      {"synthetic SNR ordering", synthetic_study},
      {"performance envelope", performance_envelope},
      {"noise-model validation", noise_model},
  };
  int failures = 0;
  int index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    Outcome o;
    o.detail.precision(4);
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << index << " (" << name << "): " << o.detail.str()
              << std::endl;
  }
  std::cout << (9 - failures) << "/9 criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
