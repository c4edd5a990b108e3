#pragma once

// CSV and JSON emission. CSV numbers use %.17g; JSON uses the shortest
// representation that round-trips.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatctl/config.hpp"
#include "heatctl/errors.hpp"
#include "heatctl/norm_search.hpp"
#include "heatctl/trajectory.hpp"
#include "heatctl/verify.hpp"

namespace heatctl::io {

using json = nlohmann::ordered_json;

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

inline void write_header(std::ofstream& out, const char* first, int num_modes) {
  out << first;
  for (int k = 1; k <= num_modes; ++k) out << ",coeff_" << k;
  out << '\n';
}

/// One row per node: t, coeff_1..coeff_N.
inline void write_states_csv(const std::string& path, const StateTrajectory& s) {
  auto out = open_out(path);
  const int n = s.states.empty() ? 0 : static_cast<int>(s.states.front().size());
  write_header(out, "t", n);
  for (std::size_t i = 0; i < s.states.size(); ++i) {
    out << fmt(s.grid.node(static_cast<int>(i)));
    for (int k = 0; k < n; ++k) out << ',' << fmt(s.states[i][k]);
    out << '\n';
  }
}

/// One row per cell, t = start of the cell.
inline void write_control_csv(const std::string& path, const ControlTrajectory& u) {
  auto out = open_out(path);
  const int n = u.values.empty() ? 0 : static_cast<int>(u.values.front().size());
  write_header(out, "t", n);
  for (int i = 0; i < u.grid.n_steps(); ++i) {
    out << fmt(u.grid.node(i));
    for (int k = 0; k < n; ++k) out << ',' << fmt(u.values[i][k]);
    out << '\n';
  }
}

inline void write_trace_csv(const std::string& path, const BisectionTrace& trace) {
  auto out = open_out(path);
  out << "n,a,b,mid,r_mid\n";
  for (const auto& s : trace.steps) {
    out << s.n << ',' << fmt(s.a) << ',' << fmt(s.b) << ',' << fmt(s.mid) << ',' << fmt(s.r_mid) << '\n';
  }
}

inline void write_json(const std::string& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

/// JSON has no NaN or infinity; those become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json config_json(const ProblemConfig& c) {
  json j;
  j["omega"] = {c.omega.lo, c.omega.hi};
  j["num_modes"] = c.num_modes;
  j["T"] = c.T;
  j["n_steps"] = c.n_steps;
  j["y0"] = c.y0;
  j["y0_scale"] = c.y0_scale;
  j["z_d"] = c.z_d;
  j["z_d_scale"] = c.z_d_scale;
  j["r"] = c.r ? json(*c.r) : json(nullptr);
  j["M"] = c.M;
  j["tau"] = c.tau;
  j["M0"] = c.M0 ? json(*c.M0) : json(nullptr);
  j["t0"] = c.t0;
  j["tol_bvp"] = c.tol_bvp;
  j["tol_M"] = c.tol_M;
  j["tol_tau"] = c.tol_tau;
  j["seed"] = c.seed;
  return j;
}

inline json report_json(const VerificationReport& rep) {
  json j;
  j["summary"] = {{"total", rep.checks.size()},
                  {"pass", rep.count(CheckStatus::pass)},
                  {"warn", rep.count(CheckStatus::warn)},
                  {"fail", rep.count(CheckStatus::fail)}};
  json checks = json::array();
  for (const auto& c : rep.checks) {
    json r;
    r["id"] = c.id;
    r["anchor"] = c.anchor;
    r["instance"] = c.instance;
    r["kind"] = c.kind;
    r["measured"] = number(c.measured);
    r["tolerance"] = number(c.tolerance);
    r["status"] = to_string(c.status);
    if (!c.note.empty()) r["note"] = c.note;
    checks.push_back(std::move(r));
  }
  j["checks"] = std::move(checks);
  return j;
}

}  // namespace heatctl::io
