#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "rnerf/errors.hpp"
#include "rnerf/geometry.hpp"

namespace rnerf {

struct EncodingConfig {
  std::size_t levels = 10;  // L
  bool include_raw = true;

  void validate() const {
    if (levels < 1) throw InvalidArgument("encoding levels must be >= 1");
  }
};

struct SceneBounds {
  Point3 min_corner{-1.0, -1.0, -1.0};
  Point3 max_corner{1.0, 1.0, 1.0};

  void validate() const {
    if (!min_corner.finite() || !max_corner.finite()) throw InvalidArgument("scene bounds must be finite");
    if (!(max_corner.x > min_corner.x) || !(max_corner.y > min_corner.y) || !(max_corner.z > min_corner.z)) {
      throw InvalidArgument("scene bounds must have positive extent on every axis");
    }
  }

  Point3 center() const { return 0.5 * (min_corner + max_corner); }
  double diagonal() const { return distance(min_corner, max_corner); }
  bool contains(const Point3& p, double slack = 0.0) const {
    return p.x >= min_corner.x - slack && p.x <= max_corner.x + slack && p.y >= min_corner.y - slack &&
           p.y <= max_corner.y + slack && p.z >= min_corner.z - slack && p.z <= max_corner.z + slack;
  }
};

/// Affine map of the box onto [-1, 1]^3. Points outside map outside; no clamping.
inline Point3 normalize(const Point3& p, const SceneBounds& bounds) {
  bounds.validate();
  auto axis = [](double v, double lo, double hi) { return 2.0 * (v - lo) / (hi - lo) - 1.0; };
  return {axis(p.x, bounds.min_corner.x, bounds.max_corner.x), axis(p.y, bounds.min_corner.y, bounds.max_corner.y),
          axis(p.z, bounds.min_corner.z, bounds.max_corner.z)};
}

inline std::size_t encoded_size(std::size_t dims, const EncodingConfig& cfg) {
  return dims * 2 * cfg.levels + (cfg.include_raw ? dims : 0);
}

/// Fourier features. Raw components first (when requested), then for each
/// component the (sin, cos) pairs at frequencies 2^k pi, k = 0 .. L-1.
inline void positional_encode_into(std::span<const double> v, const EncodingConfig& cfg, double* out) {
  if (cfg.include_raw) {
    for (double x : v) *out++ = x;
  }
  for (double x : v) {
    double freq = std::numbers::pi;
    for (std::size_t k = 0; k < cfg.levels; ++k) {
      *out++ = std::sin(freq * x);
      *out++ = std::cos(freq * x);
      freq *= 2.0;
    }
  }
}

inline std::vector<double> positional_encode(std::span<const double> v, const EncodingConfig& cfg) {
  cfg.validate();
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidArgument("positional_encode: non-finite component");
  }
  std::vector<double> out(encoded_size(v.size(), cfg));
  positional_encode_into(v, cfg, out.data());
  return out;
}

}  // namespace rnerf
