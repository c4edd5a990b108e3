#pragma once

// Bisection for the optimal norm M(r, tau): the smallest bound whose optimal
// target control lands in the closed ball B(z_d, r).
//
// a_0 = 0, b_0 = K*M0 with K the first k such that r(tau, k*M0) < r. At
// each step M_n = (a_n + b_n)/2; r(tau, M_n) > r moves a up, otherwise b
// comes down. Hence r(tau, a_n) > r >= r(tau, b_n) throughout and b_n is
// always feasible.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "heatctl/bvp.hpp"
#include "heatctl/errors.hpp"

namespace heatctl {

enum class SearchKind { norm, time };

inline const char* to_string(SearchKind k) { return k == SearchKind::norm ? "norm-search" : "time-search"; }

struct BracketStep {
  int n = 0;
  double a = 0.0;
  double b = 0.0;
  double mid = 0.0;
  double r_mid = 0.0;
};

struct BisectionTrace {
  SearchKind kind = SearchKind::norm;
  std::vector<BracketStep> steps;
  double final_value = 0.0;
  /// Width b - a of the final bracket.
  double final_tolerance = 0.0;
};

struct NormSearchOptions {
  double tol_M = 1e-10;
  BvpOptions bvp;
  int k_max = 64;
  /// Bracket scale; defaults to r_T / (T - tau).
  std::optional<double> M0;
};

struct NormResult {
  double M_star = 0.0;
  ControlTrajectory control;
  BisectionTrace trace;
  /// BVP solution at M_star; empty when M_star = 0.
  std::optional<BvpSolution> solution;
  double r_T = 0.0;
  double M0 = 0.0;
  int K = 0;
  int bvp_solves = 0;
};

namespace detail {

/// r(tau, M) with the solution kept; an attainable target counts as r = 0.
struct NormProbe {
  const SpectralDomain& domain;
  const TimeGrid& grid;
  double tau;
  const Field& y0;
  const Field& z_d;
  BvpOptions bvp;
  int solves = 0;
  std::optional<Field> warm;

  std::pair<double, std::optional<BvpSolution>> operator()(double M) {
    ++solves;
    BvpOptions opts = bvp;
    if (warm) opts.initial_terminal = warm;
    try {
      auto s = solve_bvp(domain, grid, tau, M, y0, z_d, opts);
      if (M > 0.0) warm = s.psi.terminal();
      const double r = s.reach_distance;
      return {r, std::move(s)};
    } catch (const DegenerateTargetError&) {
      if (M == 0.0) throw;
      return {0.0, std::nullopt};
    }
  }
};

/// Halves [a, b] until b - a <= tol. Requires r(a) > r >= r(b).
inline void bisect_norm(NormProbe& probe, double r, double tol, double& a, double& b,
                        std::optional<BvpSolution>& at_b, BisectionTrace& trace) {
  int n = static_cast<int>(trace.steps.size());
  while (b - a > tol) {
    const double mid = 0.5 * (a + b);
    if (!(mid > a && mid < b)) break;  // bracket at floating-point resolution
    auto [r_mid, sol] = probe(mid);
    trace.steps.push_back({n++, a, b, mid, r_mid});
    if (r_mid > r) {
      a = mid;
    } else {
      b = mid;
      at_b = std::move(sol);
    }
  }
}

}  // namespace detail

/// K = min{k >= 1 : r(tau, k*M0) < r}.
inline int find_bracket(const SpectralDomain& domain, const TimeGrid& grid, double tau, double r, const Field& y0,
                        const Field& z_d, double M0, int k_max = 64, const BvpOptions& bvp = {}) {
  if (!(M0 > 0.0)) throw ArgumentError("find_bracket: M0 must be > 0");
  const double r_T = free_distance(domain, grid, y0, z_d);
  if (!(r > 0.0 && r < r_T)) {
    throw InfeasibleError("find_bracket: r must lie in (0, r_T) with r_T = " + std::to_string(r_T));
  }
  detail::NormProbe probe{domain, grid, tau, y0, z_d, bvp};
  for (int k = 1; k <= k_max; ++k) {
    if (probe(k * M0).first < r) return k;
  }
  throw BracketError("find_bracket: r(tau, k*M0) >= r for all k <= " + std::to_string(k_max));
}

/// M(r, tau) by bisection, with the optimal norm control u^{tau, M_star}.
inline NormResult optimal_norm(const SpectralDomain& domain, const TimeGrid& grid, double tau, double r,
                               const Field& y0, const Field& z_d, const NormSearchOptions& options = {}) {
  if (!(r > 0.0)) throw InfeasibleError("optimal_norm: r must be > 0");
  if (!(options.tol_M > 0.0)) throw ArgumentError("optimal_norm: tol_M must be > 0");
  if (!(tau >= grid.t_start() && tau < grid.t_end())) throw ArgumentError("optimal_norm: tau must lie in [t_start, T)");

  NormResult out;
  out.trace.kind = SearchKind::norm;
  out.r_T = free_distance(domain, grid, y0, z_d);
  out.control = ControlTrajectory::zero(grid, tau, domain.num_modes());
  if (r >= out.r_T) return out;  // null control already reaches the ball

  out.M0 = options.M0.value_or(out.r_T / (grid.t_end() - tau));
  if (!(out.M0 > 0.0)) throw ArgumentError("optimal_norm: M0 must be > 0");

  detail::NormProbe probe{domain, grid, tau, y0, z_d, options.bvp};
  std::optional<BvpSolution> at_b;
  for (int k = 1; k <= options.k_max && out.K == 0; ++k) {
    auto [rk, sol] = probe(k * out.M0);
    if (rk < r) {
      out.K = k;
      at_b = std::move(sol);
    }
  }
  if (out.K == 0) {
    throw BracketError("optimal_norm: r(tau, k*M0) >= r for all k <= " + std::to_string(options.k_max) +
                       " (M0 = " + std::to_string(out.M0) + ")");
  }

  double a = 0.0;
  double b = out.K * out.M0;
  detail::bisect_norm(probe, r, options.tol_M, a, b, at_b, out.trace);

  out.M_star = b;
  out.trace.final_value = b;
  out.trace.final_tolerance = b - a;
  out.bvp_solves = probe.solves;
  if (!at_b) throw DegenerateTargetError("optimal_norm: target attainable at the final bound");
  out.control = at_b->control;
  out.solution = std::move(at_b);
  return out;
}

}  // namespace heatctl
