// psense: batch front end for simulation, hyperparameter fitting, artifact
// detection, reconstruction and evaluation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "psense/constraints.hpp"
#include "psense/io.hpp"
#include "psense/metrics.hpp"
#include "psense/priors.hpp"
#include "psense/simulation.hpp"
#include "psense/solvers.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace psense;

namespace {

constexpr const char* kToolVersion = "psense 1.0";

enum ExitCode { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string method_of(const fs::path& path) {
  const Container c = read_container(path);
  const auto it = c.meta.find("method");
  return it == c.meta.end() ? "unknown" : it->second;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> reduction;
};

int cmd_simulate(const SimulateArgs& a) {
  SimulationConfig cfg = load_simulation_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.reduction) cfg.reduction = *a.reduction;
  cfg.validate();
  const std::string canonical = format_simulation_config(cfg);

  const Simulation sim = simulate(cfg);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_image(dir / "reference.hdr", sim.reference, {{"kind", "reference"}, {"method", "reference"}});
  write_maps(dir / "maps.hdr", sim.maps);
  write_covariance(dir / "noise.hdr", sim.noise);
  write_coil_data(dir / "data.hdr", sim.data);
  write_text(dir / "config.txt", canonical);

  json m;
  m["tool"] = kToolVersion;
  m["command"] = "simulate";
  m["format"] = kContainerMagic;
  m["seed"] = cfg.seed;
  m["config_hash"] = hex64(fnv1a64(canonical));
  m["config"] = canonical;
  m["outputs"] = {"reference.hdr", "maps.hdr", "noise.hdr", "data.hdr", "config.txt"};
  write_json(dir / "manifest.json", m);
  return kOk;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string reference;
  std::string out = "hyper.txt";
  std::string wavelet = "sym8";
  int levels = 3;
};

int cmd_fit(const FitArgs& a) {
  const ComplexImaged ref = read_image(a.reference);
  const WaveletBasis basis = WaveletBasis::from_name(a.wavelet);
  write_hyperparameters(a.out, estimate_hyperparameters(ref, basis, a.levels));
  return kOk;
}

// ---------------------------------------------------------------- detect

struct DetectArgs {
  std::string image;
  std::string out = "constraints.hdr";
  int radius = 1;
  double quantile = 0.9;
};

int cmd_detect(const DetectArgs& a) {
  const ComplexImaged image = read_image(a.image);
  const Mask mask = detect_artifacts(image, a.radius, a.quantile);
  write_constraints(a.out, build_bounds(image, mask, a.radius));
  std::cout << "active pixels: " << mask.count() << " of " << mask.size() << '\n';
  return kOk;
}

// ---------------------------------------------------------------- reconstruct

struct ReconstructArgs {
  std::string method;
  std::vector<std::string> data;
  std::string maps;
  std::string noise;
  std::string out = "recon.hdr";
  std::string trace;
  std::string manifest;
  std::string hyper;
  std::string fit_reference;
  std::string constraints;
  bool no_constraints = false;
  std::optional<int> reduction;
  std::string wavelet = "sym8";
  int levels = 3;
  std::optional<double> gamma;
  double lambda = 1.0;
  double tau = 2.0;
  double epsilon = 1e-5;
  std::optional<double> kappa;
  int max_iterations = 1000;
  int inner_max = 50;
  std::string start = "sense";
  int radius = 1;
  double quantile = 0.9;
  std::optional<std::uint64_t> seed;
  int workers = 1;
};

struct SliceResult {
  ComplexImaged image;
  std::optional<ConvergenceTrace> trace;
};

int cmd_reconstruct(const ReconstructArgs& a) {
  const bool iterative = a.method == "wt" || a.method == "cwt";
  if (a.method != "sense" && a.method != "tikhonov" && !iterative) {
    throw ConfigError("unknown method '" + a.method + "' (sense|tikhonov|wt|cwt)");
  }
  if (a.method == "tikhonov" && !a.kappa) throw ConfigError("method tikhonov needs --kappa");

  std::vector<MultiCoilData<double>> slices;
  for (const auto& path : a.data) slices.push_back(read_coil_data(path));
  const int reduction = slices.front().reduction;
  for (const auto& s : slices) {
    if (s.reduction != reduction) throw ConfigError("all --data slices must share one reduction factor");
  }
  if (a.reduction && *a.reduction != reduction) {
    throw ConfigError("--reduction " + std::to_string(*a.reduction) + " does not match the data (R=" +
                      std::to_string(reduction) + ")");
  }
  const AcquisitionModel<double> model(read_maps(a.maps), read_covariance(a.noise), reduction);
  const WaveletBasis basis = WaveletBasis::from_name(a.wavelet);

  SolverConfig config;
  config.gamma = a.gamma;
  config.lambda = a.lambda;
  config.tau = a.tau;
  config.epsilon = a.epsilon;
  config.max_iterations = a.max_iterations;
  config.inner_max_iterations = a.inner_max;
  config.kappa = a.kappa.value_or(0.0);
  if (a.start == "zero") {
    config.start = StartPoint::zero;
  } else if (a.start != "sense") {
    throw ConfigError("--start must be 'sense' or 'zero'");
  }

  const double theta = spectral_bound(model);
  std::vector<std::string> warnings;
  std::optional<Hyperparameters> h;
  std::optional<ConstraintSet<double>> fixed_constraints;
  if (iterative) {
    // Step-size conditions are reported before any iteration runs.
    warnings = check_solver_config(config, theta);
    if (!a.hyper.empty()) {
      h = read_hyperparameters(a.hyper);
    } else if (!a.fit_reference.empty()) {
      h = estimate_hyperparameters(read_image(a.fit_reference), basis, a.levels);
    } else {
      throw ConfigError("method " + a.method + " needs --hyper or --fit-reference");
    }
    if (h->levels != a.levels) {
      throw ConfigError("hyperparameters describe " + std::to_string(h->levels) + " levels, --levels is " +
                        std::to_string(a.levels));
    }
    if (a.method == "cwt" && !a.constraints.empty() && !a.no_constraints) {
      fixed_constraints = read_constraints(a.constraints);
    }
  }

  auto run = [&](const MultiCoilData<double>& d) {
    SliceResult r;
    if (a.method == "sense") {
      r.image = sense_wls(d, model);
    } else if (a.method == "tikhonov") {
      r.image = tikhonov(d, model, *a.kappa, tikhonov_reference(sense_wls(d, model)));
    } else if (a.method == "wt") {
      auto rec = fb_reconstruct(d, model, basis, *h, config);
      r.image = std::move(rec.image);
      r.trace = std::move(rec.trace);
    } else {
      ConstraintSet<double> c = ConstraintSet<double>::unconstrained(model.height(), model.width());
      if (fixed_constraints) {
        c = *fixed_constraints;
      } else if (!a.no_constraints) {
        const ComplexImaged sense = sense_wls(d, model);
        c = build_bounds(sense, detect_artifacts(sense, a.radius, a.quantile), a.radius);
      }
      auto rec = cwt_reconstruct(d, model, basis, *h, c, config);
      r.image = std::move(rec.image);
      r.trace = std::move(rec.trace);
    }
    for (Eigen::Index i = 0; i < r.image.size(); ++i) {
      if (!std::isfinite(r.image.data()[i].real()) || !std::isfinite(r.image.data()[i].imag())) {
        throw NumericalError("reconstruction produced non-finite values");
      }
    }
    return r;
  };
  const std::vector<SliceResult> results = reconstruct_slices(slices, a.workers, run);

  json m;
  m["tool"] = kToolVersion;
  m["command"] = "reconstruct";
  m["format"] = kContainerMagic;
  m["method"] = a.method;
  m["inputs"] = {{"data", a.data}, {"maps", a.maps}, {"noise", a.noise}, {"hyper", a.hyper},
                 {"fit_reference", a.fit_reference}, {"constraints", a.constraints}};
  json p;
  p["reduction"] = reduction;
  p["theta"] = theta;
  if (iterative) {
    p["wavelet"] = basis.name();
    p["levels"] = a.levels;
    p["gamma"] = resolve_step(config, theta);
    p["lambda"] = config.lambda;
    p["epsilon"] = config.epsilon;
    p["max_iterations"] = config.max_iterations;
    p["start"] = a.start;
  }
  if (a.method == "cwt") {
    p["tau"] = config.tau;
    p["inner_tolerance"] = config.inner_tolerance;
    p["inner_max_iterations"] = config.inner_max_iterations;
    p["constraints"] = a.no_constraints ? "none" : (fixed_constraints ? "file" : "derived");
    p["se_radius"] = a.radius;
    p["quantile"] = a.quantile;
  }
  if (a.method == "tikhonov") p["kappa"] = *a.kappa;
  if (a.seed) p["seed"] = *a.seed;
  m["parameters"] = p;
  m["config_hash"] = hex64(fnv1a64(p.dump()));

  const fs::path out(a.out);
  json outputs = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    fs::path image_path = out;
    fs::path trace_path = a.trace.empty() ? fs::path() : fs::path(a.trace);
    if (results.size() > 1) {
      fs::create_directories(out);
      const std::string stem = fs::path(a.data[i]).stem().string() + "_" + a.method;
      image_path = out / (stem + ".hdr");
      trace_path = out / (stem + "_trace.csv");
    }
    write_image(image_path, results[i].image, {{"kind", "reconstruction"}, {"method", a.method}});
    json entry = {{"image", image_path.string()}};
    if (results[i].trace) {
      const auto& t = *results[i].trace;
      if (!trace_path.empty()) {
        t.write_csv(trace_path);
        entry["trace"] = trace_path.string();
      }
      entry["iterations"] = t.records.size();
      entry["converged"] = t.converged;
      entry["criterion"] = t.records.empty() ? 0.0 : t.records.back().criterion;
      entry["vartheta0"] = t.vartheta0;
      entry["vartheta1"] = t.vartheta1;
      entry["warnings"] = t.warnings;
      for (const auto& w : t.warnings) std::cerr << "warning: " << w << '\n';
    }
    outputs.push_back(entry);
  }
  m["outputs"] = outputs;
  if (iterative) m["config_warnings"] = warnings;
  const fs::path manifest = a.manifest.empty() ? fs::path(out).replace_extension(".json") : fs::path(a.manifest);
  write_json(results.size() > 1 && a.manifest.empty() ? out / "manifest.json" : manifest, m);
  return kOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string reference;
  std::vector<std::string> estimates;
  std::string out;
  std::string slice = "0";
};

int cmd_evaluate(const EvaluateArgs& a) {
  const ComplexImaged ref = read_image(a.reference);
  std::vector<MetricRow> rows;
  int status = kOk;
  for (const auto& path : a.estimates) {
    try {
      const ComplexImaged est = read_image(path);
      rows.push_back({a.slice, method_of(path), snr_db(ref, est)});
    } catch (const DimensionError& e) {
      std::cerr << "error: " << path << ": " << e.what() << '\n';
      status = kConfig;
    }
  }
  const std::string csv = format_metric_rows(rows);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_text(a.out, csv);
  }
  return status;
}

// ---------------------------------------------------------------- export

int cmd_export(const std::string& image, const std::string& out) {
  export_magnitude(read_image(image), out);
  return kOk;
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
  std::string dir;
  std::string out;
  std::string wavelet = "sym8";
  int levels = 3;
  double kappa_factor = 0.01;
  int radius = 1;
  double quantile = 0.9;
};

// All four methods on one simulated directory, hyperparameters fitted from the
// reference; one CSV row with the methods as columns.
int cmd_compare(const CompareArgs& a) {
  const fs::path dir(a.dir);
  const ComplexImaged ref = read_image(dir / "reference.hdr");
  const MultiCoilData<double> d = read_coil_data(dir / "data.hdr");
  const AcquisitionModel<double> model(read_maps(dir / "maps.hdr"), read_covariance(dir / "noise.hdr"), d.reduction);
  const WaveletBasis basis = WaveletBasis::from_name(a.wavelet);
  const Hyperparameters h = estimate_hyperparameters(ref, basis, a.levels);
  const double theta = spectral_bound(model);

  const ComplexImaged sense = sense_wls(d, model);
  const ComplexImaged tk = tikhonov(d, model, a.kappa_factor * theta, tikhonov_reference(sense));
  const auto wt = fb_reconstruct(d, model, basis, h);
  const auto c = build_bounds(sense, detect_artifacts(sense, a.radius, a.quantile), a.radius);
  const auto cwt = cwt_reconstruct(d, model, basis, h, c);

  std::ostringstream csv;
  csv.precision(10);
  csv << "slice,sense,tikhonov,wt,cwt\n";
  csv << dir.filename().string() << ',' << snr_db(ref, sense) << ',' << snr_db(ref, tk) << ','
      << snr_db(ref, wt.image) << ',' << snr_db(ref, cwt.image) << '\n';
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(a.out, csv.str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SENSE reconstruction with wavelet-domain priors and convex constraints", "psense"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Write a synthetic phantom study (reference, maps, covariance, data)");
  s->add_option("config", sim.config, "Simulation config file (key = value)")->required();
  s->add_option("-o,--out", sim.out, "Output directory");
  s->add_option("--seed", sim.seed, "Override the config seed");
  s->add_option("--reduction", sim.reduction, "Override the reduction factor R");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit subband hyperparameters by maximum likelihood");
  f->add_option("reference", fit.reference, "Reference image")->required();
  f->add_option("-o,--out", fit.out, "Hyperparameter file");
  f->add_option("--wavelet", fit.wavelet, "haar, db8 or sym8");
  f->add_option("--levels", fit.levels, "Decomposition depth j_max");

  DetectArgs det;
  auto* dt = app.add_subcommand("detect", "Detect artifact regions and build intensity bounds");
  dt->add_option("image", det.image, "Basic-SENSE image")->required();
  dt->add_option("-o,--out", det.out, "Constraint set file");
  dt->add_option("--radius", det.radius, "Structuring-element radius");
  dt->add_option("--quantile", det.quantile, "Gradient quantile threshold in [0, 1)");

  ReconstructArgs rec;
  auto* r = app.add_subcommand("reconstruct", "Reconstruct full-FOV images");
  r->add_option("method", rec.method, "sense, tikhonov, wt or cwt")->required();
  r->add_option("--data", rec.data, "Coil data (repeat for several slices)")->required();
  r->add_option("--maps", rec.maps, "Sensitivity maps")->required();
  r->add_option("--noise", rec.noise, "Noise covariance")->required();
  r->add_option("-o,--out", rec.out, "Output image (a directory for several slices)");
  r->add_option("--trace", rec.trace, "Convergence trace CSV");
  r->add_option("--manifest", rec.manifest, "Run manifest (default: next to the output)");
  r->add_option("--hyper", rec.hyper, "Hyperparameter file");
  r->add_option("--fit-reference", rec.fit_reference, "Fit hyperparameters from this image instead");
  r->add_option("--constraints", rec.constraints, "Constraint set file (cwt; default: derive from SENSE)");
  r->add_flag("--no-constraints", rec.no_constraints, "Run cwt with an unbounded constraint set");
  r->add_option("--reduction", rec.reduction, "Expected reduction factor R");
  r->add_option("--wavelet", rec.wavelet, "haar, db8 or sym8");
  r->add_option("--levels", rec.levels, "Decomposition depth j_max");
  r->add_option("--gamma", rec.gamma, "Step size (default 1.99/(2 theta))");
  r->add_option("--lambda", rec.lambda, "Relaxation in (0, 1]");
  r->add_option("--tau", rec.tau, "Douglas-Rachford relaxation in (0, 2]");
  r->add_option("--epsilon", rec.epsilon, "Relative criterion-change tolerance");
  r->add_option("--kappa", rec.kappa, "Tikhonov weight");
  r->add_option("--max-iter", rec.max_iterations, "Outer iteration cap");
  r->add_option("--inner-max", rec.inner_max, "Douglas-Rachford iteration cap");
  r->add_option("--start", rec.start, "Initial iterate: sense or zero");
  r->add_option("--radius", rec.radius, "Structuring-element radius for derived constraints");
  r->add_option("--quantile", rec.quantile, "Gradient quantile for derived constraints");
  r->add_option("--seed", rec.seed, "Recorded in the manifest");
  r->add_option("--workers", rec.workers, "Parallel slice workers");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "SNR of estimates against a reference (CSV)");
  e->add_option("reference", ev.reference, "Reference image")->required();
  e->add_option("estimates", ev.estimates, "Estimated images")->required();
  e->add_option("-o,--out", ev.out, "CSV file (default stdout)");
  e->add_option("--slice", ev.slice, "Slice label");

  std::string export_in, export_out;
  auto* x = app.add_subcommand("export", "Write the normalized magnitude as binary PGM");
  x->add_option("image", export_in, "Image")->required();
  x->add_option("-o,--out", export_out, "PGM file")->required();

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "Run all four methods on a simulated study (CSV, methods as columns)");
  c->add_option("dir", cmp.dir, "Directory written by 'simulate'")->required();
  c->add_option("-o,--out", cmp.out, "CSV file (default stdout)");
  c->add_option("--wavelet", cmp.wavelet, "haar, db8 or sym8");
  c->add_option("--levels", cmp.levels, "Decomposition depth j_max");
  c->add_option("--radius", cmp.radius, "Structuring-element radius");
  c->add_option("--quantile", cmp.quantile, "Gradient quantile threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*f) return cmd_fit(fit);
    if (*dt) return cmd_detect(det);
    if (*r) return cmd_reconstruct(rec);
    if (*e) return cmd_evaluate(ev);
    if (*x) return cmd_export(export_in, export_out);
    if (*c) return cmd_compare(cmp);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kConfig;
  } catch (const DimensionError& err) {
    std::cerr << "dimension error: " << err.what() << '\n';
    return kConfig;
  } catch (const NumericalError& err) {
    std::cerr << "numerical error: " << err.what() << '\n';
    return kNumerical;
  } catch (const IoError& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return kIo;
  }
  return kOk;
}
