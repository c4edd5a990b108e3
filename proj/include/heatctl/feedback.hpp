#pragma once

// Optimal-norm feedback.
//
// N(t0, y0) is the optimal norm of the problem restarted at (t0, y0), and
//   F(t0, y0) = N * G psibar(t0) / ||G psibar(t0)||
// with psibar the adjoint of the BVP solved from (t0, y0) at bound N. The
// closed loop applies F in sampled-data form: on cell [t_i, t_i+1) it holds
// N(t_i, y_i) times the masked adjoint direction of that solve at the cell
// midpoint.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "heatctl/bvp.hpp"
#include "heatctl/errors.hpp"
#include "heatctl/norm_search.hpp"
#include "heatctl/spectral.hpp"
#include "heatctl/trajectory.hpp"

namespace heatctl {

struct FeedbackScenario {
  double r = 0.0;
  TimeGrid grid;
  Field y0;
  Field z_d;
  /// Initial time; must be a grid node.
  double t0 = 0.0;
  /// Activation time (>= t0, a grid node): free flow on [t0, tau].
  std::optional<double> tau;
  NormSearchOptions norm;
};

struct ClosedLoopRun {
  StateTrajectory states;
  ControlTrajectory applied;
  /// N(t_i, y_i) per cell, NaN on cells before activation.
  std::vector<double> N_values;
  /// ||G psi(t_i + dt/2)|| / ||psi(T)|| per active cell.
  std::vector<double> masked_adjoint;
  double N0 = 0.0;
  /// Optimal open-loop trajectory of the problem posed at activation.
  StateTrajectory open_loop;
  int cold_restarts = 0;
  int bvp_solves = 0;
};

namespace detail {

inline int node_index(const TimeGrid& grid, double t, const char* what) {
  const int i = grid.nearest_node(t);
  if (std::abs(grid.node(i) - t) > 1e-12 * grid.length() || i >= grid.n_steps()) {
    throw ArgumentError(std::string(what) + ": time must be a grid node in [t_start, T)");
  }
  return i;
}

struct NormAtState {
  double N = 0.0;
  std::optional<BvpSolution> solution;
  bool cold = false;
  int solves = 0;
};

/// N(t_i, y) on grid.tail(i). With a previous value, brackets around it
/// first and widens x4 up to eight times before falling back to a cold search.
inline NormAtState norm_at_state(const SpectralDomain& domain, const TimeGrid& grid, int i, const Field& y,
                                 const Field& z_d, double r, const NormSearchOptions& options,
                                 std::optional<double> previous, double half_width, std::optional<Field> warm) {
  const TimeGrid tail = grid.tail(i);
  NormAtState out;
  if (free_distance(domain, tail, y, z_d) <= r) return out;

  if (previous && *previous > 0.0) {
    NormProbe probe{domain, tail, tail.t_start(), y, z_d, options.bvp, 0, warm};
    double hw = std::max(half_width, 2.0 * options.tol_M);
    for (int widen = 0; widen <= 8; ++widen, hw *= 4.0) {
      double a = std::max(0.0, *previous - hw);
      double b = *previous + hw;
      const double ra = a > 0.0 ? probe(a).first : free_distance(domain, tail, y, z_d);
      if (!(ra > r)) continue;
      auto [rb, sb] = probe(b);
      if (!(rb <= r)) continue;
      BisectionTrace trace;
      bisect_norm(probe, r, options.tol_M, a, b, sb, trace);
      if (!sb) break;
      out.N = b;
      out.solution = std::move(sb);
      out.solves = probe.solves;
      return out;
    }
    out.solves = probe.solves;
  }

  auto res = optimal_norm(domain, tail, tail.t_start(), r, y, z_d, options);
  out.N = res.M_star;
  out.solution = std::move(res.solution);
  out.cold = true;
  out.solves += res.bvp_solves;
  return out;
}

inline Field masked_direction(const SpectralDomain& domain, const Field& psi, double psi_T_norm, double& ratio) {
  const Field g = apply_mask(domain, psi);
  const double ng = g.norm();
  ratio = psi_T_norm > 0.0 ? ng / psi_T_norm : 0.0;
  if (!(ratio >= kAdjointFloor)) throw DegenerateAdjointError("feedback: masked adjoint below floor");
  return (1.0 / ng) * g;
}

}  // namespace detail

/// N(t0, y0); zero when the free flow from (t0, y0) already ends in B(z_d, r).
inline double optimal_norm_value(const SpectralDomain& domain, const FeedbackScenario& sc, double t0, const Field& y0) {
  if (!(sc.r > 0.0)) throw ArgumentError("optimal_norm_value: r must be > 0");
  const int i = detail::node_index(sc.grid, t0, "optimal_norm_value");
  return detail::norm_at_state(domain, sc.grid, i, y0, sc.z_d, sc.r, sc.norm, std::nullopt, 0.0, std::nullopt).N;
}

/// F(t0, y0), a field of norm N(t0, y0).
inline Field feedback_control(const SpectralDomain& domain, const FeedbackScenario& sc, double t0, const Field& y0) {
  if (!(sc.r > 0.0)) throw ArgumentError("feedback_control: r must be > 0");
  const int i = detail::node_index(sc.grid, t0, "feedback_control");
  auto st = detail::norm_at_state(domain, sc.grid, i, y0, sc.z_d, sc.r, sc.norm, std::nullopt, 0.0, std::nullopt);
  if (st.N == 0.0) return Field::zeros(domain.num_modes());
  double ratio = 0.0;
  const auto& psi = st.solution->psi;
  return st.N * detail::masked_direction(domain, psi.initial(), psi.terminal().norm(), ratio);
}

/// Sampled-data closed loop y' = Laplacian y + chi_omega F(t, y) from (t0, y0),
/// activated at scenario.tau when given.
inline ClosedLoopRun simulate_closed_loop(const SpectralDomain& domain, const FeedbackScenario& sc) {
  if (!(sc.r > 0.0)) throw ArgumentError("simulate_closed_loop: r must be > 0");
  domain.require_size(sc.y0, "simulate_closed_loop");
  domain.require_size(sc.z_d, "simulate_closed_loop");
  const TimeGrid& grid = sc.grid;
  const int i0 = detail::node_index(grid, sc.t0, "simulate_closed_loop");
  const double tau = sc.tau.value_or(sc.t0);
  if (tau < sc.t0) throw ArgumentError("simulate_closed_loop: tau must be >= t0");
  const int ia = detail::node_index(grid, tau, "simulate_closed_loop");
  const int n = grid.n_steps();
  const int N = domain.num_modes();
  const double half = 0.5 * grid.dt();

  const TimeGrid run_grid = grid.tail(i0);
  ClosedLoopRun run;
  run.states = {run_grid, {sc.y0}};
  run.applied = ControlTrajectory::zero(run_grid, tau, N);
  run.N_values.assign(n - i0, std::nan(""));
  run.masked_adjoint.assign(n - i0, std::nan(""));

  Field y = sc.y0;
  for (int i = i0; i < ia; ++i) {
    y = propagate(domain, y, grid.dt());
    run.states.states.push_back(y);
  }

  std::optional<double> prev;
  double last_step = 0.0;
  std::optional<Field> warm;
  const Eigen::ArrayXd decay = (-domain.eigenvalues().array() * grid.dt()).exp();
  const Eigen::ArrayXd gain = source_gain(domain, grid.dt());
  for (int i = ia; i < n; ++i) {
    auto st = detail::norm_at_state(domain, grid, i, y, sc.z_d, sc.r, sc.norm, prev, 2.0 * last_step, warm);
    run.bvp_solves += st.solves;
    if (st.cold && i > ia) ++run.cold_restarts;
    if (i == ia) {
      run.N0 = st.N;
      if (st.solution) {
        run.open_loop = {run_grid, std::vector<Field>(run.states.states)};
        run.open_loop.states.pop_back();
        for (const auto& s : st.solution->phi.states) run.open_loop.states.push_back(s);
      }
    } else if (run.N0 > 0.0 && st.N > 10.0 * run.N0) {
      throw InstabilityError("simulate_closed_loop: N(t_i, y_i) = " + std::to_string(st.N) + " exceeds 10 N0 at step " +
                             std::to_string(i));
    }
    if (prev) last_step = std::abs(st.N - *prev);
    prev = st.N;
    run.N_values[i - i0] = st.N;

    Field u = Field::zeros(N);
    if (st.N > 0.0) {
      const Field& q = st.solution->psi.terminal();
      warm = q;
      double ratio = 0.0;
      const Field psi_mid = propagate(domain, q, grid.t_end() - grid.node(i) - half);
      u = st.N * detail::masked_direction(domain, psi_mid, q.norm(), ratio);
      run.masked_adjoint[i - i0] = ratio;
    }
    run.applied.values[i - i0] = u;
    y = Field((y.coeffs().array() * decay + (domain.gram() * u.coeffs()).array() * gain).matrix());
    run.states.states.push_back(y);
  }
  if (run.open_loop.states.empty()) {
    // N0 = 0: the open loop is the free flow
    run.open_loop = solve_forward(domain, run_grid, sc.y0, ControlTrajectory::zero(run_grid, tau, N));
  }
  return run;
}

}  // namespace heatctl
