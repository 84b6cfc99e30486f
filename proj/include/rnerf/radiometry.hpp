#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "rnerf/errors.hpp"

namespace rnerf {

/// Narrowband complex signal as (amplitude, phase). Phase is not wrapped.
struct PhasorSignal {
  double amplitude = 0.0;
  double phase = 0.0;

  std::complex<double> complex() const { return std::polar(amplitude, phase); }
  friend bool operator==(const PhasorSignal&, const PhasorSignal&) = default;
};

struct RadioConstants {
  double amplitude_coefficient = 1.0;  // rho
  double phase_coefficient = 1.0;      // xi
  double wavelength = 0.125;           // meters

  void validate() const {
    if (!(amplitude_coefficient > 0.0) || !(phase_coefficient > 0.0) || !(wavelength > 0.0)) {
      throw InvalidArgument("radio constants must be strictly positive");
    }
  }
};

/// Per-voxel S and T over an M x N ray grid, ray-major.
struct VoxelField {
  std::size_t ray_count = 0;
  std::size_t samples_per_ray = 0;
  std::vector<PhasorSignal> signals;
  std::vector<PhasorSignal> transmissions;
};

/// Maps a phase into (-pi, pi].
inline double wrap_phase(double phase) {
  double w = std::remainder(phase, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

inline PhasorSignal from_complex(std::complex<double> z) {
  double phase = std::arg(z);
  if (phase <= -std::numbers::pi) phase += 2.0 * std::numbers::pi;
  return {std::abs(z), phase};
}

/// Free-space transmission over distance t: (rho / t, 2 pi xi t / lambda).
inline PhasorSignal analytic_transmission(double t, const RadioConstants& constants) {
  if (!(t > 0.0)) throw SingularityError("analytic_transmission: non-positive travel distance");
  return {constants.amplitude_coefficient / t,
          2.0 * std::numbers::pi * constants.phase_coefficient * t / constants.wavelength};
}

inline PhasorSignal render_stage(std::span<const PhasorSignal> signals, std::span<const PhasorSignal> transmissions) {
  if (signals.empty()) throw InvalidArgument("render_stage: empty field");
  if (signals.size() != transmissions.size()) throw InvalidArgument("render_stage: S/T size mismatch");
  double re = 0.0;
  double im = 0.0;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    const double mag = signals[i].amplitude * transmissions[i].amplitude;
    const double ph = signals[i].phase + transmissions[i].phase;
    re += mag * std::cos(ph);
    im += mag * std::sin(ph);
  }
  return from_complex({re, im});
}

inline PhasorSignal render_stage(const VoxelField& field) {
  const std::size_t expected = field.ray_count * field.samples_per_ray;
  if (expected == 0 || field.signals.size() != expected || field.transmissions.size() != expected) {
    throw InvalidArgument("render_stage: field grids empty or inconsistent");
  }
  return render_stage(std::span<const PhasorSignal>(field.signals), std::span<const PhasorSignal>(field.transmissions));
}

inline PhasorSignal render_total(const PhasorSignal& stage1, const PhasorSignal& stage2) {
  return {stage1.amplitude * stage2.amplitude, wrap_phase(stage1.phase + stage2.phase)};
}

inline constexpr double kDefaultFloorEps = 1e-8;

inline double strength_db(const PhasorSignal& signal, double floor_eps = kDefaultFloorEps) {
  if (!(floor_eps > 0.0)) throw InvalidArgument("strength_db: floor_eps must be > 0");
  return 20.0 * std::log10(std::max(signal.amplitude, floor_eps));
}

}  // namespace rnerf
