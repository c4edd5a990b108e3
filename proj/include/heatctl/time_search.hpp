#pragma once

// Bisection for the optimal activation time tau(M, r): the latest tau at
// which bound M still reaches B(z_d, r).
//
// a_0 = t_start, b_0 = T; r(tau_n, M) > r moves b down, otherwise a moves
// up, so r(tau, a_n) <= r < r(tau, b_n) and a_n is always feasible.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "heatctl/bvp.hpp"
#include "heatctl/errors.hpp"
#include "heatctl/norm_search.hpp"

namespace heatctl {

struct TimeSearchOptions {
  double tol_tau = 1e-12;
  BvpOptions bvp;
};

struct TimeResult {
  double tau_star = 0.0;
  /// tau_star moved to the nearest grid node.
  double tau_snapped = 0.0;
  ControlTrajectory control;
  BvpSolution solution;
  BisectionTrace trace;
  double r_T = 0.0;
  /// r(t_start, M).
  double r_at_zero = 0.0;
  /// d r(tau, M) / d tau at tau_star, central difference.
  double local_slope = 0.0;
  int bvp_solves = 0;
};

namespace detail {

struct TimeProbe {
  const SpectralDomain& domain;
  const TimeGrid& grid;
  double M;
  const Field& y0;
  const Field& z_d;
  BvpOptions bvp;
  int solves = 0;
  std::optional<Field> warm;

  /// nullopt when the target is attainable (r = 0).
  std::optional<BvpSolution> operator()(double tau) {
    ++solves;
    BvpOptions opts = bvp;
    if (warm) opts.initial_terminal = warm;
    try {
      auto s = solve_bvp(domain, grid, tau, M, y0, z_d, opts);
      warm = s.psi.terminal();
      return s;
    } catch (const DegenerateTargetError&) {
      return std::nullopt;
    }
  }
};

}  // namespace detail

inline TimeResult optimal_time(const SpectralDomain& domain, const TimeGrid& grid, double M, double r,
                               const Field& y0, const Field& z_d, const TimeSearchOptions& options = {}) {
  if (!(M > 0.0) || !std::isfinite(M)) throw ArgumentError("optimal_time: M must be > 0");
  if (!(options.tol_tau > 0.0)) throw ArgumentError("optimal_time: tol_tau must be > 0");

  TimeResult out;
  out.trace.kind = SearchKind::time;
  out.r_T = free_distance(domain, grid, y0, z_d);
  if (r >= out.r_T) {
    throw InfeasibleError("optimal_time: r >= r_T = " + std::to_string(out.r_T) +
                          ", the null control already reaches the ball and tau(M,r) is undefined");
  }

  detail::TimeProbe probe{domain, grid, M, y0, z_d, options.bvp};
  const double t0 = grid.t_start();
  auto first = probe(t0);
  if (!first) {
    throw DegenerateTargetError("optimal_time: target attainable with immediate activation (r(0,M) = 0)");
  }
  out.r_at_zero = first->reach_distance;
  if (r < out.r_at_zero) {
    throw InfeasibleError("optimal_time: target ball unreachable even with immediate activation (r < r(0,M) = " +
                          std::to_string(out.r_at_zero) + ")");
  }

  double a = t0;
  double b = grid.t_end();
  BvpSolution at_a = std::move(*first);
  int n = 0;
  while (b - a > options.tol_tau) {
    const double mid = 0.5 * (a + b);
    if (!(mid > a && mid < b)) break;
    auto s = probe(mid);
    // an attainable target counts as r = 0 <= r, which never occurs past a feasible a
    const double r_mid = s ? s->reach_distance : 0.0;
    out.trace.steps.push_back({n++, a, b, mid, r_mid});
    if (r_mid > r) {
      b = mid;
    } else {
      a = mid;
      if (s) at_a = std::move(*s);
    }
  }

  out.tau_star = a;
  out.tau_snapped = grid.node(grid.nearest_node(a));
  out.trace.final_value = a;
  out.trace.final_tolerance = b - a;
  out.control = at_a.control;
  out.solution = std::move(at_a);

  // observed slope of tau -> r(tau, M), used to turn tol_tau into a value budget
  const double h = 1e-4 * grid.length();
  const double lo = std::max(t0, out.tau_star - h);
  const double hi = std::min(grid.t_end() - h, out.tau_star + h);
  if (hi > lo) {
    auto sl = probe(lo);
    auto sh = probe(hi);
    if (sl && sh) out.local_slope = (sh->reach_distance - sl->reach_distance) / (hi - lo);
  }
  out.bvp_solves = probe.solves;
  return out;
}

}  // namespace heatctl
