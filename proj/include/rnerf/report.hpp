#pragma once

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rnerf/evaluation.hpp"

namespace rnerf {

struct NamedReport {
  std::string method;
  MetricReport metrics;
};

/// Human-readable table.
inline void write_metric_table(std::ostream& os, std::span<const NamedReport> rows) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-28s %10s %10s %10s %8s\n", "method", "MAE_dB", "MED_dB", "RMSE_dB", "count");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-28s %10.4f %10.4f %10.4f %8zu\n", r.method.c_str(), r.metrics.mae, r.metrics.med,
                  r.metrics.rmse, r.metrics.count);
    os << buf;
  }
}

/// Machine-readable rows: method,metric,value.
inline void write_metric_csv(std::ostream& os, std::span<const NamedReport> rows) {
  os << "method,metric,value\n" << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.method << ",mae," << r.metrics.mae << '\n';
    os << r.method << ",med," << r.metrics.med << '\n';
    os << r.method << ",rmse," << r.metrics.rmse << '\n';
    os << r.method << ",count," << r.metrics.count << '\n';
  }
}

/// Two columns: threshold_db fraction.
inline void write_cdf(std::ostream& os, std::span<const double> thresholds, std::span<const double> fractions) {
  os << "# threshold_db fraction\n" << std::setprecision(17);
  for (std::size_t i = 0; i < thresholds.size(); ++i) os << thresholds[i] << ' ' << fractions[i] << '\n';
}

/// Two columns: epoch value (1-based epochs).
inline void write_history(std::ostream& os, std::span<const double> values, std::size_t first_epoch = 1) {
  os << std::setprecision(17);
  for (std::size_t i = 0; i < values.size(); ++i) os << first_epoch + i << ' ' << values[i] << '\n';
}

template <class Fn>
void write_file(const std::string& path, Fn&& fn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  fn(os);
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace rnerf
