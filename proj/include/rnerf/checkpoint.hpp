#pragma once

// Checkpoint file layout (UTF-8 text, LF line endings):
//
//   rnerf-checkpoint 1
//   model.kind <two-stage|single-stage|mlp>
//   model.width <int>
//   model.tn_depth <int>
//   model.use_pe <0|1>
//   model.levels <int>
//   rays.count <int>
//   rays.samples <int>
//   rays.t_near <hexfloat>
//   rays.t_far <hexfloat>
//   bounds.min <hexfloat> <hexfloat> <hexfloat>
//   bounds.max <hexfloat> <hexfloat> <hexfloat>
//   targets.mean <hexfloat>
//   targets.stddev <hexfloat>
//   floor_eps <hexfloat>
//   optimizer.step <int>
//   optimizer.moments <0|1>
//   tensor <name> <rows> <cols>      (repeated, canonical layer order)
//   <cols hexfloats>                 (rows lines, row-major)
//   end
//
// Tensor names are "<layer>.weights" / "<layer>.biases" (biases are rows x 1)
// for the parameters, followed by "adam.m.<...>" and "adam.v.<...>" when
// optimizer.moments is 1. Values are C99 hexfloats, so round trips are exact.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rnerf/errors.hpp"
#include "rnerf/network.hpp"
#include "rnerf/train.hpp"

namespace rnerf {

struct Checkpoint {
  Model model;
  std::optional<OptimizerState> optimizer;
};

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

inline void write_matrix(std::ostream& os, const std::string& name, const Eigen::MatrixXd& m) {
  os << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) os << ' ';
      os << hex(m(i, j));
    }
    os << '\n';
  }
}

inline void write_params(std::ostream& os, const std::string& prefix, const ModelParams& p) {
  for_each_layer(p, [&](const std::string& name, const DenseLayer& l) {
    write_matrix(os, prefix + name + ".weights", l.weights);
    write_matrix(os, prefix + name + ".biases", l.biases);
  });
}

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  std::string next() {
    std::string line;
    if (!std::getline(is_, line)) throw ParseError("unexpected end of checkpoint", line_ + 1);
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  std::size_t line() const { return line_; }

 private:
  std::istream& is_;
  std::size_t line_ = 0;
};

inline double parse_hex(const std::string& tok, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw ParseError("bad number '" + tok + "'", line);
  return v;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

inline std::vector<std::string> expect_key(LineReader& r, const std::string& key, std::size_t n_values) {
  auto toks = split_ws(r.next());
  if (toks.empty() || toks[0] != key) throw ParseError("expected '" + key + "'", r.line());
  if (toks.size() != n_values + 1) throw ParseError("'" + key + "' expects " + std::to_string(n_values) + " values", r.line());
  toks.erase(toks.begin());
  return toks;
}

inline std::size_t parse_size(const std::string& tok, std::size_t line) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(tok, &pos);
    if (pos != tok.size()) throw ParseError("bad integer '" + tok + "'", line);
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw ParseError("bad integer '" + tok + "'", line);
  }
}

inline void read_matrix(LineReader& r, const std::string& name, Eigen::MatrixXd& m) {
  const auto toks = split_ws(r.next());
  if (toks.size() != 4 || toks[0] != "tensor") throw ParseError("expected tensor header", r.line());
  if (toks[1] != name) throw ParseError("expected tensor '" + name + "', found '" + toks[1] + "'", r.line());
  const auto rows = parse_size(toks[2], r.line());
  const auto cols = parse_size(toks[3], r.line());
  if (static_cast<Eigen::Index>(rows) != m.rows() || static_cast<Eigen::Index>(cols) != m.cols()) {
    throw ParseError("tensor '" + name + "' has shape " + toks[2] + "x" + toks[3] + ", expected " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()),
                     r.line());
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto vals = split_ws(r.next());
    if (static_cast<Eigen::Index>(vals.size()) != m.cols()) throw ParseError("wrong value count in '" + name + "'", r.line());
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = parse_hex(vals[static_cast<std::size_t>(j)], r.line());
  }
}

inline void read_params(LineReader& r, const std::string& prefix, ModelParams& p) {
  for_each_layer(p, [&](const std::string& name, DenseLayer& l) {
    read_matrix(r, prefix + name + ".weights", l.weights);
    Eigen::MatrixXd b(l.biases.size(), 1);
    read_matrix(r, prefix + name + ".biases", b);
    l.biases = b.col(0);
  });
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Model& model, const OptimizerState* optimizer = nullptr) {
  using detail::hex;
  const auto& s = model.spec;
  os << "rnerf-checkpoint " << kCheckpointVersion << '\n';
  os << "model.kind " << to_string(s.kind) << '\n';
  os << "model.width " << s.width << '\n';
  os << "model.tn_depth " << s.tn_depth << '\n';
  os << "model.use_pe " << (s.use_pe ? 1 : 0) << '\n';
  os << "model.levels " << s.levels << '\n';
  os << "rays.count " << model.rays.ray_count << '\n';
  os << "rays.samples " << model.rays.samples_per_ray << '\n';
  os << "rays.t_near " << hex(model.rays.t_near) << '\n';
  os << "rays.t_far " << hex(model.rays.t_far) << '\n';
  const auto& lo = model.bounds.min_corner;
  const auto& hi = model.bounds.max_corner;
  os << "bounds.min " << hex(lo.x) << ' ' << hex(lo.y) << ' ' << hex(lo.z) << '\n';
  os << "bounds.max " << hex(hi.x) << ' ' << hex(hi.y) << ' ' << hex(hi.z) << '\n';
  os << "targets.mean " << hex(model.targets.mean) << '\n';
  os << "targets.stddev " << hex(model.targets.stddev) << '\n';
  os << "floor_eps " << hex(model.floor_eps) << '\n';
  os << "optimizer.step " << (optimizer ? optimizer->step : 0) << '\n';
  os << "optimizer.moments " << (optimizer ? 1 : 0) << '\n';
  detail::write_params(os, "", model.params);
  if (optimizer) {
    detail::write_params(os, "adam.m.", optimizer->first_moment);
    detail::write_params(os, "adam.v.", optimizer->second_moment);
  }
  os << "end\n";
}

inline Checkpoint read_checkpoint(std::istream& is) {
  detail::LineReader r(is);
  {
    const auto toks = detail::split_ws(r.next());
    if (toks.size() != 2 || toks[0] != "rnerf-checkpoint") throw ParseError("not a checkpoint file", r.line());
    if (toks[1] != std::to_string(kCheckpointVersion)) throw ParseError("unsupported checkpoint version " + toks[1], r.line());
  }
  Checkpoint ck;
  Model& m = ck.model;
  auto one = [&](const std::string& key) { return detail::expect_key(r, key, 1)[0]; };
  try {
    m.spec.kind = parse_model_kind(one("model.kind"));
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what(), r.line());
  }
  m.spec.width = detail::parse_size(one("model.width"), r.line());
  m.spec.tn_depth = detail::parse_size(one("model.tn_depth"), r.line());
  m.spec.use_pe = detail::parse_size(one("model.use_pe"), r.line()) != 0;
  m.spec.levels = detail::parse_size(one("model.levels"), r.line());
  m.rays.ray_count = detail::parse_size(one("rays.count"), r.line());
  m.rays.samples_per_ray = detail::parse_size(one("rays.samples"), r.line());
  m.rays.t_near = detail::parse_hex(one("rays.t_near"), r.line());
  m.rays.t_far = detail::parse_hex(one("rays.t_far"), r.line());
  auto point = [&](const std::string& key) {
    const auto v = detail::expect_key(r, key, 3);
    return Point3{detail::parse_hex(v[0], r.line()), detail::parse_hex(v[1], r.line()), detail::parse_hex(v[2], r.line())};
  };
  m.bounds.min_corner = point("bounds.min");
  m.bounds.max_corner = point("bounds.max");
  m.targets.mean = detail::parse_hex(one("targets.mean"), r.line());
  m.targets.stddev = detail::parse_hex(one("targets.stddev"), r.line());
  m.floor_eps = detail::parse_hex(one("floor_eps"), r.line());
  const auto step = detail::parse_size(one("optimizer.step"), r.line());
  const bool has_moments = detail::parse_size(one("optimizer.moments"), r.line()) != 0;
  try {
    m.spec.validate();
    m.rays.validate();
    m.bounds.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid checkpoint header: ") + e.what(), r.line());
  }
  m.params = make_params(m.spec);
  detail::read_params(r, "", m.params);
  if (has_moments) {
    OptimizerState st = make_optimizer_state(m.params);
    st.step = step;
    detail::read_params(r, "adam.m.", st.first_moment);
    detail::read_params(r, "adam.v.", st.second_moment);
    ck.optimizer = std::move(st);
  }
  if (r.next() != "end") throw ParseError("expected 'end'", r.line());
  return ck;
}

inline void save_checkpoint(const std::string& path, const Model& model, const OptimizerState* optimizer = nullptr) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_checkpoint(os, model, optimizer);
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  return read_checkpoint(is);
}

}  // namespace rnerf
