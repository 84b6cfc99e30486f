#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rnerf/encoding.hpp"
#include "rnerf/errors.hpp"
#include "rnerf/evaluation.hpp"
#include "rnerf/network.hpp"
#include "rnerf/scene_oracle.hpp"
#include "rnerf/train.hpp"

namespace rnerf {

/// Unknown key in a config file. Kept apart from ParseError so the CLI can
/// report the key itself.
class UnknownKeyError : public ParseError {
 public:
  UnknownKeyError(const std::string& key, std::size_t line) : ParseError("unknown config key '" + key + "'", line), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Every knob of a run. See README.md for the key list.
struct RunConfig {
  ScenarioConfig scenario;
  OracleConfig oracle;
  ModelSpec model;
  RayTracingConfig rays;
  bool t_far_auto = true;  // t_far = scene diagonal
  std::optional<SceneBounds> bounds;  // empty = derived from the scenario
  double bounds_margin = 0.25;
  TrainConfig train;
  DatasetSplit split;

  SceneBounds resolved_bounds() const { return bounds ? *bounds : scene_bounds(scenario, bounds_margin); }

  RayTracingConfig resolved_rays() const {
    RayTracingConfig r = rays;
    if (t_far_auto) r.t_far = resolved_bounds().diagonal();
    return r;
  }

  ExperimentSetup experiment() const {
    ExperimentSetup e;
    e.spec = model;
    e.rays = resolved_rays();
    e.bounds = resolved_bounds();
    e.train = train;
    return e;
  }

  void validate() const {
    scenario.validate();
    oracle.validate();
    model.validate();
    resolved_rays().validate();
    resolved_bounds().validate();
    train.validate();
    split.validate();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& v, const std::string& key, std::size_t line) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::logic_error&) {
    throw ParseError("key '" + key + "': bad number '" + v + "'", line);
  }
}

inline std::uint64_t to_uint(const std::string& v, const std::string& key, std::size_t line) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::logic_error&) {
    throw ParseError("key '" + key + "': bad non-negative integer '" + v + "'", line);
  }
}

inline bool to_bool(const std::string& v, const std::string& key, std::size_t line) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("key '" + key + "': bad boolean '" + v + "'", line);
}

}  // namespace detail

/// "x, y, z"
inline Point3 parse_point(const std::string& text, const std::string& what = "point", std::size_t line = 0) {
  std::vector<double> v;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) v.push_back(detail::to_double(detail::trim(tok), what, line));
  if (v.size() != 3) throw ParseError(what + ": expected 'x, y, z', got '" + text + "'", line);
  return {v[0], v[1], v[2]};
}

/// "x, y, z; x, y, z; ..."
inline std::vector<Point3> parse_point_list(const std::string& text, const std::string& what, std::size_t line) {
  std::vector<Point3> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ';');) {
    tok = detail::trim(tok);
    if (!tok.empty()) out.push_back(parse_point(tok, what, line));
  }
  if (out.empty()) throw ParseError(what + ": empty point list", line);
  return out;
}

inline void apply_config_value(RunConfig& c, const std::string& key, const std::string& value, std::size_t line = 0) {
  using detail::to_bool;
  using detail::to_double;
  using detail::to_uint;
  const auto& v = value;
  const auto L = line;
  std::optional<SceneBounds>& b = c.bounds;
  static const std::map<std::string, std::function<void(RunConfig&, const std::string&, std::size_t)>> setters = {
      {"scene.tx", [](RunConfig& c, const std::string& v, std::size_t l) { c.scenario.tx = parse_point(v, "scene.tx", l); }},
      {"scene.ris_candidates", [](RunConfig& c, const std::string& v, std::size_t l) { c.scenario.ris_candidates = parse_point_list(v, "scene.ris_candidates", l); }},
      {"scene.rx_min", [](RunConfig& c, const std::string& v, std::size_t l) { c.scenario.rx_min = parse_point(v, "scene.rx_min", l); }},
      {"scene.rx_max", [](RunConfig& c, const std::string& v, std::size_t l) { c.scenario.rx_max = parse_point(v, "scene.rx_max", l); }},
      {"radio.rho", [](RunConfig& c, const std::string& v, std::size_t l) { c.oracle.constants.amplitude_coefficient = to_double(v, "radio.rho", l); }},
      {"radio.xi", [](RunConfig& c, const std::string& v, std::size_t l) { c.oracle.constants.phase_coefficient = to_double(v, "radio.xi", l); }},
      {"radio.wavelength", [](RunConfig& c, const std::string& v, std::size_t l) { c.oracle.constants.wavelength = to_double(v, "radio.wavelength", l); }},
      {"oracle.rows", [](RunConfig& c, const std::string& v, std::size_t l) { c.oracle.rows = to_uint(v, "oracle.rows", l); }},
      {"oracle.cols", [](RunConfig& c, const std::string& v, std::size_t l) { c.oracle.cols = to_uint(v, "oracle.cols", l); }},
      {"oracle.spacing", [](RunConfig& c, const std::string& v, std::size_t l) { c.oracle.element_spacing = to_double(v, "oracle.spacing", l); }},
      {"oracle.profile", [](RunConfig& c, const std::string& v, std::size_t l) {
         try {
           c.oracle.profile = parse_phase_profile(v);
         } catch (const InvalidArgument& e) {
           throw ParseError(std::string("key 'oracle.profile': ") + e.what(), l);
         }
       }},
      {"oracle.focal_point", [](RunConfig& c, const std::string& v, std::size_t l) { c.oracle.focal_point = parse_point(v, "oracle.focal_point", l); }},
      {"oracle.profile_seed", [](RunConfig& c, const std::string& v, std::size_t l) { c.oracle.profile_seed = to_uint(v, "oracle.profile_seed", l); }},
      {"oracle.noise_std_db", [](RunConfig& c, const std::string& v, std::size_t l) { c.oracle.noise_std_db = to_double(v, "oracle.noise_std_db", l); }},
      {"model.kind", [](RunConfig& c, const std::string& v, std::size_t l) {
         try {
           c.model.kind = parse_model_kind(v);
         } catch (const InvalidArgument& e) {
           throw ParseError(std::string("key 'model.kind': ") + e.what(), l);
         }
       }},
      {"model.width", [](RunConfig& c, const std::string& v, std::size_t l) { c.model.width = to_uint(v, "model.width", l); }},
      {"model.tn_depth", [](RunConfig& c, const std::string& v, std::size_t l) { c.model.tn_depth = to_uint(v, "model.tn_depth", l); }},
      {"encoding.levels", [](RunConfig& c, const std::string& v, std::size_t l) { c.model.levels = to_uint(v, "encoding.levels", l); }},
      {"encoding.enabled", [](RunConfig& c, const std::string& v, std::size_t l) { c.model.use_pe = to_bool(v, "encoding.enabled", l); }},
      {"rays.count", [](RunConfig& c, const std::string& v, std::size_t l) { c.rays.ray_count = to_uint(v, "rays.count", l); }},
      {"rays.samples", [](RunConfig& c, const std::string& v, std::size_t l) { c.rays.samples_per_ray = to_uint(v, "rays.samples", l); }},
      {"rays.t_near", [](RunConfig& c, const std::string& v, std::size_t l) { c.rays.t_near = to_double(v, "rays.t_near", l); }},
      {"rays.t_far", [](RunConfig& c, const std::string& v, std::size_t l) {
         c.t_far_auto = v == "auto";
         if (!c.t_far_auto) c.rays.t_far = to_double(v, "rays.t_far", l);
       }},
      {"bounds.margin", [](RunConfig& c, const std::string& v, std::size_t l) { c.bounds_margin = to_double(v, "bounds.margin", l); }},
      {"train.learning_rate", [](RunConfig& c, const std::string& v, std::size_t l) { c.train.learning_rate = to_double(v, "train.learning_rate", l); }},
      {"train.batch_size", [](RunConfig& c, const std::string& v, std::size_t l) { c.train.batch_size = to_uint(v, "train.batch_size", l); }},
      {"train.epochs", [](RunConfig& c, const std::string& v, std::size_t l) { c.train.epochs = to_uint(v, "train.epochs", l); }},
      {"train.seed", [](RunConfig& c, const std::string& v, std::size_t l) { c.train.seed = to_uint(v, "train.seed", l); }},
      {"train.adam_beta1", [](RunConfig& c, const std::string& v, std::size_t l) { c.train.adam_beta1 = to_double(v, "train.adam_beta1", l); }},
      {"train.adam_beta2", [](RunConfig& c, const std::string& v, std::size_t l) { c.train.adam_beta2 = to_double(v, "train.adam_beta2", l); }},
      {"train.adam_eps", [](RunConfig& c, const std::string& v, std::size_t l) { c.train.adam_eps = to_double(v, "train.adam_eps", l); }},
      {"train.patience", [](RunConfig& c, const std::string& v, std::size_t l) { c.train.patience = to_uint(v, "train.patience", l); }},
      {"train.calibrate_output", [](RunConfig& c, const std::string& v, std::size_t l) { c.train.calibrate_output = to_bool(v, "train.calibrate_output", l); }},
      {"train.validation_fraction", [](RunConfig& c, const std::string& v, std::size_t l) { c.train.validation_fraction = to_double(v, "train.validation_fraction", l); }},
      {"split.train_fraction", [](RunConfig& c, const std::string& v, std::size_t l) { c.split.train_fraction = to_double(v, "split.train_fraction", l); }},
      {"split.seed", [](RunConfig& c, const std::string& v, std::size_t l) { c.split.seed = to_uint(v, "split.seed", l); }},
  };
  if (key == "bounds.min" || key == "bounds.max") {
    if (v == "auto") {
      b.reset();
      return;
    }
    if (!b) b = scene_bounds(c.scenario, c.bounds_margin);
    (key == "bounds.min" ? b->min_corner : b->max_corner) = parse_point(v, key, L);
    return;
  }
  const auto it = setters.find(key);
  if (it == setters.end()) throw UnknownKeyError(key, L);
  it->second(c, v, L);
}

/// Parses `key = value` lines on top of `base`. '#' starts a comment.
inline RunConfig parse_config(std::istream& is, RunConfig base = {}) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", n);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", n);
    apply_config_value(base, key, value, n);
  }
  try {
    base.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid configuration: ") + e.what(), 0);
  }
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config '" + path + "'");
  return parse_config(is, std::move(base));
}

}  // namespace rnerf
