#pragma once

#include <cmath>

#include "rnerf/geometry.hpp"

namespace rnerf {

/// One labeled placement: transmitter, RIS and receiver positions with the
/// received strength in dB.
struct SceneSample {
  Point3 tx;
  Point3 ris;
  Point3 rx;
  double strength_db = 0.0;

  friend bool operator==(const SceneSample&, const SceneSample&) = default;
};

}  // namespace rnerf
