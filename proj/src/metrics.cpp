#include "psense/metrics.hpp"

#include <sstream>

namespace psense {

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("pearson: sample sizes differ");
  if (a.size() < 2) return std::nullopt;
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (!(saa > 0) || !(sbb > 0)) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

RateCheck rate_bound(const ConvergenceTrace& trace, double gamma, double lambda, double vartheta1) {
  if (trace.records.empty()) throw DimensionError("rate_bound: empty trace");
  for (const auto& r : trace.records) {
    if (std::isnan(r.dist_to_ref)) throw DimensionError("rate_bound: trace has no distances to a reference iterate");
  }
  const double rate = 1.0 - lambda * gamma * vartheta1 / (1.0 + gamma * vartheta1);
  const double first = trace.records.front().dist_to_ref;
  RateCheck out;
  out.pass = true;
  out.margin = std::numeric_limits<double>::infinity();
  for (const auto& r : trace.records) {
    const double bound = std::pow(rate, r.n - trace.records.front().n) * first;
    if (r.dist_to_ref > bound * (1.0 + kRateSlack)) out.pass = false;
    if (r.dist_to_ref > 0) {
      const double m = bound / r.dist_to_ref;
      if (m < out.margin) {
        out.margin = m;
        out.tightest_n = r.n;
      }
    }
  }
  return out;
}

std::string format_metric_rows(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "slice,method,snr_db\n";
  for (const auto& r : rows) {
    out << r.slice << ',' << r.method << ',';
    if (std::isinf(r.snr_db)) {
      out << (r.snr_db > 0 ? "inf" : "-inf");
    } else {
      out << r.snr_db;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace psense
