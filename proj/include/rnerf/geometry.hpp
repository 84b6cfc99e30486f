#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "rnerf/errors.hpp"

namespace rnerf {

/// A position in meters.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
  friend bool operator==(const Point3&, const Point3&) = default;
};

inline Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Point3 operator*(double s, const Point3& p) { return {s * p.x, s * p.y, s * p.z}; }

inline double norm(const Point3& p) { return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z); }
inline double distance(const Point3& a, const Point3& b) { return norm(a - b); }

/// Unit-norm direction. Construct through `Direction3::from` to get the
/// normalization; the aggregate form is for callers that already hold a unit vector.
struct Direction3 {
  double dx = 1.0;
  double dy = 0.0;
  double dz = 0.0;

  static Direction3 from(const Point3& v) {
    const double n = rnerf::norm(v);
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("direction from zero or non-finite vector");
    return {v.x / n, v.y / n, v.z / n};
  }

  double norm() const { return std::sqrt(dx * dx + dy * dy + dz * dz); }
  friend bool operator==(const Direction3&, const Direction3&) = default;
};

struct RayTracingConfig {
  std::size_t ray_count = 36;       // M
  std::size_t samples_per_ray = 16;  // N
  double t_near = 0.0;
  double t_far = 1.0;

  void validate() const {
    if (ray_count < 1) throw InvalidArgument("ray_count must be >= 1");
    if (samples_per_ray < 1) throw InvalidArgument("samples_per_ray must be >= 1");
    if (!(t_near >= 0.0) || !std::isfinite(t_near)) throw InvalidArgument("t_near must be finite and >= 0");
    if (!(t_far > t_near) || !std::isfinite(t_far)) throw InvalidArgument("t_far must be finite and > t_near");
  }
};

/// M rays x N voxels around one rendering origin. Grids are flattened
/// ray-major: index m * N + n.
struct RayBundle {
  Point3 origin;
  std::size_t ray_count = 0;
  std::size_t samples_per_ray = 0;
  std::vector<Direction3> directions;
  std::vector<Point3> voxels;
  std::vector<double> distances;

  std::size_t size() const { return voxels.size(); }
  const Point3& voxel(std::size_t m, std::size_t n) const { return voxels[m * samples_per_ray + n]; }
  double distance(std::size_t m, std::size_t n) const { return distances[m * samples_per_ray + n]; }
};

inline Point3 point_on_ray(const Point3& origin, const Direction3& dir, double t) {
  if (!origin.finite() || !std::isfinite(dir.dx) || !std::isfinite(dir.dy) || !std::isfinite(dir.dz) ||
      !std::isfinite(t)) {
    throw InvalidArgument("point_on_ray: non-finite input");
  }
  if (t < 0.0) throw InvalidArgument("point_on_ray: negative distance");
  return {origin.x + t * dir.dx, origin.y + t * dir.dy, origin.z + t * dir.dz};
}

/// Fibonacci-sphere lattice: deterministic, near-uniform solid-angle coverage.
inline std::vector<Direction3> uniform_directions(std::size_t count) {
  if (count == 0) throw InvalidArgument("uniform_directions: count must be >= 1");
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Direction3> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * static_cast<double>(i);
    // Renormalize to absorb the rounding in r.
    out.push_back(Direction3::from({r * std::cos(phi), r * std::sin(phi), z}));
  }
  return out;
}

/// Stratified midpoints t_n = t_near + (n + 1/2)(t_far - t_near)/N on every ray.
inline RayBundle build_ray_bundle(const Point3& origin, const RayTracingConfig& cfg) {
  cfg.validate();
  if (!origin.finite()) throw InvalidArgument("build_ray_bundle: non-finite origin");
  RayBundle bundle;
  bundle.origin = origin;
  bundle.ray_count = cfg.ray_count;
  bundle.samples_per_ray = cfg.samples_per_ray;
  bundle.directions = uniform_directions(cfg.ray_count);
  const std::size_t total = cfg.ray_count * cfg.samples_per_ray;
  bundle.voxels.reserve(total);
  bundle.distances.reserve(total);
  const double step = (cfg.t_far - cfg.t_near) / static_cast<double>(cfg.samples_per_ray);
  for (const auto& dir : bundle.directions) {
    for (std::size_t n = 0; n < cfg.samples_per_ray; ++n) {
      const double t = cfg.t_near + (static_cast<double>(n) + 0.5) * step;
      bundle.distances.push_back(t);
      bundle.voxels.push_back(point_on_ray(origin, dir, t));
    }
  }
  return bundle;
}

}  // namespace rnerf
