#pragma once

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rnerf/encoding.hpp"
#include "rnerf/errors.hpp"
#include "rnerf/geometry.hpp"
#include "rnerf/radiometry.hpp"
#include "rnerf/sample.hpp"

namespace rnerf {

enum class PhaseProfile { specular, focus, random };

inline const char* to_string(PhaseProfile p) {
  switch (p) {
    case PhaseProfile::specular: return "specular";
    case PhaseProfile::focus: return "focus";
    case PhaseProfile::random: return "random";
  }
  return "?";
}

inline PhaseProfile parse_phase_profile(const std::string& s) {
  if (s == "specular") return PhaseProfile::specular;
  if (s == "focus") return PhaseProfile::focus;
  if (s == "random") return PhaseProfile::random;
  throw InvalidArgument("unknown phase profile '" + s + "'");
}

/// Analytical ground truth: free-space TX -> element -> RX legs summed
/// coherently over a planar RIS element grid.
struct OracleConfig {
  RadioConstants constants;
  std::size_t rows = 4;
  std::size_t cols = 4;
  double element_spacing = 0.0625;  // lambda / 2 at the default wavelength
  PhaseProfile profile = PhaseProfile::focus;
  Point3 focal_point{1.75, 6.0, 0.0};
  std::uint64_t profile_seed = 0;  // random profile only
  double noise_std_db = 0.0;

  void validate() const {
    constants.validate();
    if (rows < 1 || cols < 1) throw InvalidArgument("RIS element grid must be at least 1x1");
    if (!(element_spacing > 0.0)) throw InvalidArgument("element_spacing must be > 0");
    if (!(noise_std_db >= 0.0)) throw InvalidArgument("noise_std_db must be >= 0");
    if (!focal_point.finite()) throw InvalidArgument("focal point must be finite");
  }
};

/// Element offsets from the RIS centre. The array lies in the x-z plane.
inline std::vector<Point3> ris_element_offsets(const OracleConfig& cfg) {
  std::vector<Point3> out;
  out.reserve(cfg.rows * cfg.cols);
  const double r0 = 0.5 * static_cast<double>(cfg.rows - 1);
  const double c0 = 0.5 * static_cast<double>(cfg.cols - 1);
  for (std::size_t r = 0; r < cfg.rows; ++r) {
    for (std::size_t c = 0; c < cfg.cols; ++c) {
      out.push_back({(static_cast<double>(c) - c0) * cfg.element_spacing, 0.0,
                     (static_cast<double>(r) - r0) * cfg.element_spacing});
    }
  }
  return out;
}

/// Per-element phase shifts for a given placement.
inline std::vector<double> ris_phases(const Point3& tx, const Point3& ris, const OracleConfig& cfg) {
  const auto offsets = ris_element_offsets(cfg);
  std::vector<double> phases(offsets.size(), 0.0);
  switch (cfg.profile) {
    case PhaseProfile::specular:
      break;
    case PhaseProfile::focus: {
      const double k = 2.0 * std::numbers::pi * cfg.constants.phase_coefficient / cfg.constants.wavelength;
      for (std::size_t e = 0; e < offsets.size(); ++e) {
        const Point3 el = ris + offsets[e];
        phases[e] = -k * (distance(tx, el) + distance(el, cfg.focal_point));
      }
      break;
    }
    case PhaseProfile::random: {
      std::mt19937_64 rng(cfg.profile_seed);
      std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
      for (double& p : phases) p = u(rng);
      break;
    }
  }
  return phases;
}

/// Complex RIS-path channel sum over all elements with explicit phases.
inline std::complex<double> oracle_channel(const Point3& tx, const Point3& ris, const Point3& rx,
                                           const OracleConfig& cfg, std::span<const double> phases) {
  const auto offsets = ris_element_offsets(cfg);
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t e = 0; e < offsets.size(); ++e) {
    const Point3 el = ris + offsets[e];
    const double d1 = distance(tx, el);
    const double d2 = distance(el, rx);
    if (!(d1 > 0.0) || !(d2 > 0.0)) throw InvalidArgument("oracle: coincident TX/RIS element/RX");
    const PhasorSignal leg1 = analytic_transmission(d1, cfg.constants);
    const PhasorSignal leg2 = analytic_transmission(d2, cfg.constants);
    acc += std::polar(leg1.amplitude * leg2.amplitude, leg1.phase + leg2.phase + phases[e]);
  }
  return acc;
}

/// Noise-free ground-truth strength in dB.
inline double oracle_strength_clean(const Point3& tx, const Point3& ris, const Point3& rx, const OracleConfig& cfg) {
  cfg.validate();
  if (!tx.finite() || !ris.finite() || !rx.finite()) throw InvalidArgument("oracle: non-finite position");
  if (!(distance(tx, ris) > 0.0) || !(distance(ris, rx) > 0.0)) throw InvalidArgument("oracle: coincident points");
  const auto phases = ris_phases(tx, ris, cfg);
  return strength_db(from_complex(oracle_channel(tx, ris, rx, cfg, phases)));
}

/// Ground truth plus zero-mean Gaussian dB noise drawn from `noise_seed`.
inline double oracle_strength(const Point3& tx, const Point3& ris, const Point3& rx, const OracleConfig& cfg,
                              std::uint64_t noise_seed = 0) {
  double db = oracle_strength_clean(tx, ris, rx, cfg);
  if (cfg.noise_std_db > 0.0) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> n(0.0, cfg.noise_std_db);
    db += n(rng);
  }
  return db;
}

/// Placement ranges for dataset generation. Defaults: a desk-scale layout with
/// TX at (1.5, -1.5, 0), RIS in the z = 0 plane
/// within |x|, |y| <= 0.8, RX in [1, 2.5] x [5, 7] x [-1.5, 1.5].
struct ScenarioConfig {
  Point3 tx{1.5, -1.5, 0.0};
  std::vector<Point3> ris_candidates{{-0.8, -0.4, 0.0},    {-0.8 / 3.0, -0.4, 0.0}, {0.8 / 3.0, -0.4, 0.0},
                                     {0.8, -0.4, 0.0},     {-0.8, 0.4, 0.0},        {-0.8 / 3.0, 0.4, 0.0},
                                     {0.8 / 3.0, 0.4, 0.0}, {0.8, 0.4, 0.0}};
  Point3 rx_min{1.0, 5.0, -1.5};
  Point3 rx_max{2.5, 7.0, 1.5};

  void validate() const {
    if (ris_candidates.empty()) throw InvalidArgument("scenario needs at least one RIS candidate");
    if (!(rx_max.x > rx_min.x) || !(rx_max.y > rx_min.y) || !(rx_max.z > rx_min.z)) {
      throw InvalidArgument("scenario RX box must have positive extent");
    }
  }
};

/// RX uniform in its box, RIS uniform over the candidate set, labels from the
/// oracle. Deterministic given `seed`.
inline std::vector<SceneSample> generate_dataset(const ScenarioConfig& scenario, std::size_t count,
                                                 const OracleConfig& cfg, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("generate_dataset: count must be >= 1");
  scenario.validate();
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, scenario.ris_candidates.size() - 1);
  std::vector<SceneSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SceneSample s;
    s.tx = scenario.tx;
    s.ris = scenario.ris_candidates[pick(rng)];
    s.rx = {scenario.rx_min.x + u01(rng) * (scenario.rx_max.x - scenario.rx_min.x),
            scenario.rx_min.y + u01(rng) * (scenario.rx_max.y - scenario.rx_min.y),
            scenario.rx_min.z + u01(rng) * (scenario.rx_max.z - scenario.rx_min.z)};
    const std::uint64_t noise_seed = rng();
    s.strength_db = oracle_strength(s.tx, s.ris, s.rx, cfg, noise_seed);
    out.push_back(s);
  }
  return out;
}

/// Axis-aligned box around every TX, RIS candidate and RX position, padded
/// by `margin` meters on each side.
inline SceneBounds scene_bounds(const ScenarioConfig& scenario, double margin = 0.25) {
  Point3 lo = scenario.rx_min;
  Point3 hi = scenario.rx_max;
  auto grow = [&](const Point3& p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  };
  grow(scenario.tx);
  for (const auto& r : scenario.ris_candidates) grow(r);
  const Point3 pad{margin, margin, margin};
  return {lo - pad, hi + pad};
}

// ---------------------------------------------------------------------------
// Dataset file: CSV, fixed header, LF line endings.

inline constexpr const char* kDatasetHeader = "tx_x,tx_y,tx_z,ris_x,ris_y,ris_z,rx_x,rx_y,rx_z,rss_db";

inline void write_dataset(std::ostream& os, std::span<const SceneSample> samples) {
  os << kDatasetHeader << '\n';
  char buf[64];
  auto put = [&](double v, char sep) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    os.write(buf, end - buf);
    os.put(sep);
  };
  for (const auto& s : samples) {
    put(s.tx.x, ','); put(s.tx.y, ','); put(s.tx.z, ',');
    put(s.ris.x, ','); put(s.ris.y, ','); put(s.ris.z, ',');
    put(s.rx.x, ','); put(s.rx.y, ','); put(s.rx.z, ',');
    put(s.strength_db, '\n');
  }
}

inline void save_dataset(std::span<const SceneSample> samples, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_dataset(os, samples);
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

inline double parse_double_field(std::string_view field, std::size_t line) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError("bad number '" + std::string(field) + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite value '" + std::string(field) + "'", line);
  return v;
}

inline std::vector<SceneSample> read_dataset(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line)) throw ParseError("empty dataset file", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDatasetHeader) throw ParseError("unexpected header '" + line + "'", line_no);
  std::vector<SceneSample> out;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v[10];
    std::size_t n = 0;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      const std::string_view field = std::string_view(line).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      if (n >= 10) throw ParseError("too many fields", line_no);
      v[n++] = parse_double_field(field, line_no);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (n != 10) throw ParseError("expected 10 fields, got " + std::to_string(n), line_no);
    out.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, {v[6], v[7], v[8]}, v[9]});
  }
  if (out.empty()) throw ParseError("dataset has no rows", line_no);
  return out;
}

inline std::vector<SceneSample> load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open dataset '" + path + "'");
  return read_dataset(is);
}

// ---------------------------------------------------------------------------

struct DatasetSplit {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidArgument("train_fraction must be in (0, 1)");
  }
};

struct SplitResult {
  std::vector<SceneSample> train;
  std::vector<SceneSample> test;
};

/// Seeded shuffle, then the first round(fraction * n) samples go to train.
inline SplitResult split_dataset(std::span<const SceneSample> samples, const DatasetSplit& split) {
  split.validate();
  if (samples.size() < 2) throw InvalidArgument("split_dataset: need at least 2 samples");
  const auto n_train = static_cast<std::size_t>(std::llround(split.train_fraction * static_cast<double>(samples.size())));
  if (n_train == 0 || n_train >= samples.size()) {
    throw InvalidArgument("split_dataset: fraction leaves one side empty");
  }
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(split.seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  SplitResult out;
  out.train.reserve(n_train);
  out.test.reserve(samples.size() - n_train);
  for (std::size_t k = 0; k < idx.size(); ++k) (k < n_train ? out.train : out.test).push_back(samples[idx[k]]);
  return out;
}

}  // namespace rnerf
