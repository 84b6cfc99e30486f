#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rnerf/autodiff.hpp"
#include "rnerf/errors.hpp"
#include "rnerf/network.hpp"

namespace rnerf {

/// Axis-aligned sampling plane: `axis` is held at `level`, the other two axes
/// (in x, y, z order) span [u_min, u_max] x [v_min, v_max].
struct FieldSpec {
  char axis = 'z';
  double level = 0.0;
  double u_min = 0.0, u_max = 1.0;
  double v_min = 0.0, v_max = 1.0;
  std::size_t u_cells = 20;
  std::size_t v_cells = 20;

  void validate() const {
    if (axis != 'x' && axis != 'y' && axis != 'z') throw InvalidArgument("field plane axis must be x, y or z");
    if (u_cells < 1 || v_cells < 1) throw InvalidArgument("field resolution must be >= 1x1");
    if (!(u_max >= u_min) || !(v_max >= v_min)) throw InvalidArgument("field ranges must be ascending");
  }

  /// Cell centres.
  Point3 cell(std::size_t iu, std::size_t iv) const {
    const double u = u_min + (static_cast<double>(iu) + 0.5) * (u_max - u_min) / static_cast<double>(u_cells);
    const double v = v_min + (static_cast<double>(iv) + 0.5) * (v_max - v_min) / static_cast<double>(v_cells);
    switch (axis) {
      case 'x': return {level, u, v};
      case 'y': return {u, level, v};
      default: return {u, v, level};
    }
  }
};

/// Predicted dB grid, row-major with v_cells rows of u_cells values.
struct FieldGrid {
  FieldSpec spec;
  std::vector<double> values;
  std::size_t outside_bounds = 0;

  double at(std::size_t iu, std::size_t iv) const { return values[iv * spec.u_cells + iu]; }

  std::pair<std::size_t, std::size_t> argmax() const {
    const auto it = std::max_element(values.begin(), values.end());
    const auto k = static_cast<std::size_t>(it - values.begin());
    return {k % spec.u_cells, k / spec.u_cells};
  }
};

inline FieldGrid compute_field(const Model& model, const Point3& tx, const Point3& ris, const FieldSpec& spec) {
  spec.validate();
  FieldGrid grid{spec, {}, 0};
  std::vector<SceneSample> queries;
  queries.reserve(spec.u_cells * spec.v_cells);
  for (std::size_t iv = 0; iv < spec.v_cells; ++iv) {
    for (std::size_t iu = 0; iu < spec.u_cells; ++iu) {
      const Point3 p = spec.cell(iu, iv);
      if (!model.bounds.contains(p)) ++grid.outside_bounds;
      queries.push_back({tx, ris, p, 0.0});
    }
  }
  grid.values = predict_batch(model, queries);
  return grid;
}

inline void write_field_csv(std::ostream& os, const FieldGrid& grid) {
  os << std::setprecision(17);
  for (std::size_t iv = 0; iv < grid.spec.v_cells; ++iv) {
    for (std::size_t iu = 0; iu < grid.spec.u_cells; ++iu) {
      if (iu > 0) os << ',';
      os << grid.at(iu, iv);
    }
    os << '\n';
  }
}

/// Plain (P2) graymap; min dB -> 0, max dB -> 255, linear in between.
inline void write_field_pgm(std::ostream& os, const FieldGrid& grid) {
  const auto [lo_it, hi_it] = std::minmax_element(grid.values.begin(), grid.values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  os << "P2\n";
  os << std::setprecision(17) << "# min_db " << lo << "\n# max_db " << hi << '\n';
  os << grid.spec.u_cells << ' ' << grid.spec.v_cells << "\n255\n";
  for (std::size_t iv = 0; iv < grid.spec.v_cells; ++iv) {
    for (std::size_t iu = 0; iu < grid.spec.u_cells; ++iu) {
      const double t = hi > lo ? (grid.at(iu, iv) - lo) / (hi - lo) : 0.0;
      if (iu > 0) os << ' ';
      os << static_cast<int>(std::lround(255.0 * t));
    }
    os << '\n';
  }
}

inline std::vector<std::vector<double>> read_field_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) {
      try {
        row.push_back(std::stod(tok));
      } catch (const std::logic_error&) {
        throw ParseError("bad field value '" + tok + "'", n);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace rnerf
