#pragma once

// Flat key = value scenario files.
//
//   # comment
//   omega    = 0.2 0.8
//   num_modes = 16
//   y0       = mode1
//   z_d      = bump
//   z_d_scale = 0.8
//
// Field specs are a preset name (mode<k>, bump) or a list of coefficients,
// zero-padded to num_modes.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "heatctl/errors.hpp"
#include "heatctl/spectral.hpp"
#include "heatctl/trajectory.hpp"

namespace heatctl {

struct ProblemConfig {
  Interval omega{0.2, 0.8};
  int num_modes = 16;
  double T = 1.0;
  int n_steps = 200;
  std::string y0 = "mode1";
  double y0_scale = 1.0;
  std::string z_d = "bump";
  double z_d_scale = 1.0;
  std::optional<double> r;
  double M = 1.0;
  double tau = 0.0;
  std::optional<double> M0;
  double t0 = 0.0;
  double tol_bvp = 1e-12;
  double tol_M = 1e-10;
  double tol_tau = 1e-12;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

inline long long parse_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + text + "'");
  }
  return v;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::string s = text;
  for (char& ch : s) {
    if (ch == ',') ch = ' ';
  }
  std::istringstream in(s);
  std::vector<double> out;
  for (std::string tok; in >> tok;) out.push_back(parse_double(key, tok));
  return out;
}

}  // namespace detail

/// Indicator of (0.3, 0.7) projected on the first n sine modes.
inline Field bump_field(int n) {
  Field f = Field::zeros(n);
  for (int k = 1; k <= n; ++k) {
    const double kpi = k * std::numbers::pi;
    f.coeffs()[k - 1] = std::numbers::sqrt2 * (std::cos(0.3 * kpi) - std::cos(0.7 * kpi)) / kpi;
  }
  return f;
}

/// Expands a field spec to num_modes coefficients.
inline Field expand_field(const std::string& spec, int num_modes, const std::string& key = "field") {
  const std::string s = detail::trim(spec);
  if (s == "bump") return bump_field(num_modes);
  if (s.rfind("mode", 0) == 0) {
    const long long k = detail::parse_integer(key, s.substr(4));
    if (k < 1 || k > num_modes) {
      throw ConfigError("config: " + key + " preset '" + s + "' outside 1.." + std::to_string(num_modes));
    }
    return Field::mode(num_modes, static_cast<Eigen::Index>(k));
  }
  const auto values = detail::parse_list(key, s);
  if (values.empty()) throw ConfigError("config: " + key + " is empty");
  if (static_cast<int>(values.size()) > num_modes) {
    throw ConfigError("config: " + key + " has " + std::to_string(values.size()) + " coefficients but num_modes = " +
                      std::to_string(num_modes));
  }
  Field f = Field::zeros(num_modes);
  for (std::size_t i = 0; i < values.size(); ++i) f.coeffs()[static_cast<Eigen::Index>(i)] = values[i];
  return f;
}

inline void validate(const ProblemConfig& c) {
  SpectralDomain(c.omega, c.num_modes);  // interval and mode count
  if (!(c.T > 0.0)) throw ConfigError("config: T must be > 0");
  if (c.n_steps < 1) throw ConfigError("config: n_steps must be >= 1");
  if (!(c.tau >= 0.0 && c.tau < c.T)) throw ConfigError("config: tau must lie in [0, T)");
  if (!(c.t0 >= 0.0 && c.t0 < c.T)) throw ConfigError("config: t0 must lie in [0, T)");
  if (!(c.M >= 0.0)) throw ConfigError("config: M must be >= 0");
  if (c.r && !(*c.r > 0.0)) throw ConfigError("config: r must be > 0");
  if (c.M0 && !(*c.M0 > 0.0)) throw ConfigError("config: M0 must be > 0");
  if (!(c.tol_bvp > 0.0) || !(c.tol_M > 0.0) || !(c.tol_tau > 0.0)) throw ConfigError("config: tolerances must be > 0");
  expand_field(c.y0, c.num_modes, "y0");
  expand_field(c.z_d, c.num_modes, "z_d");
}

inline ProblemConfig parse_config(std::istream& in) {
  ProblemConfig c;
  std::map<std::string, std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (val.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty value for '" + key + "'");
    if (!seen.emplace(key, val).second) throw ConfigError("config: duplicate key '" + key + "'");

    if (key == "omega") {
      const auto v = detail::parse_list(key, val);
      if (v.size() != 2) throw ConfigError("config: omega expects two numbers a b");
      c.omega = {v[0], v[1]};
    } else if (key == "num_modes") {
      c.num_modes = static_cast<int>(detail::parse_integer(key, val));
    } else if (key == "T") {
      c.T = detail::parse_double(key, val);
    } else if (key == "n_steps") {
      c.n_steps = static_cast<int>(detail::parse_integer(key, val));
    } else if (key == "y0") {
      c.y0 = val;
    } else if (key == "y0_scale") {
      c.y0_scale = detail::parse_double(key, val);
    } else if (key == "z_d") {
      c.z_d = val;
    } else if (key == "z_d_scale") {
      c.z_d_scale = detail::parse_double(key, val);
    } else if (key == "r") {
      c.r = detail::parse_double(key, val);
    } else if (key == "M") {
      c.M = detail::parse_double(key, val);
    } else if (key == "tau") {
      c.tau = detail::parse_double(key, val);
    } else if (key == "M0") {
      c.M0 = detail::parse_double(key, val);
    } else if (key == "t0") {
      c.t0 = detail::parse_double(key, val);
    } else if (key == "tol_bvp") {
      c.tol_bvp = detail::parse_double(key, val);
    } else if (key == "tol_M") {
      c.tol_M = detail::parse_double(key, val);
    } else if (key == "tol_tau") {
      c.tol_tau = detail::parse_double(key, val);
    } else if (key == "seed") {
      const long long s = detail::parse_integer(key, val);
      if (s < 0) throw ConfigError("config: seed must be >= 0");
      c.seed = static_cast<std::uint64_t>(s);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  validate(c);
  return c;
}

inline ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  return parse_config(in);
}

inline SpectralDomain make_domain(const ProblemConfig& c) { return SpectralDomain(c.omega, c.num_modes); }

/// Grid over (0, T) with n_steps * 2^refine cells.
inline TimeGrid make_grid(const ProblemConfig& c, int refine = 0) {
  if (refine < 0 || refine > 16) throw ConfigError("refine must lie in 0..16");
  return TimeGrid(0.0, c.T, c.n_steps).refined(refine);
}

inline Field initial_state(const ProblemConfig& c) { return c.y0_scale * expand_field(c.y0, c.num_modes, "y0"); }
inline Field target_state(const ProblemConfig& c) { return c.z_d_scale * expand_field(c.z_d, c.num_modes, "z_d"); }

}  // namespace heatctl
