#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "heatctl/errors.hpp"
#include "heatctl/spectral.hpp"

namespace heatctl {

/// Uniform grid t_start = t_0 < t_1 < ... < t_n = t_end.
class TimeGrid {
 public:
  TimeGrid() : TimeGrid(0.0, 1.0, 1) {}
  TimeGrid(double t_start, double t_end, int n_steps) : t_start_(t_start), t_end_(t_end), n_steps_(n_steps) {
    if (!(t_start < t_end)) throw ArgumentError("TimeGrid: t_start must be < t_end");
    if (n_steps < 1) throw ArgumentError("TimeGrid: n_steps must be >= 1");
    dt_ = (t_end - t_start) / n_steps;
  }

  double t_start() const noexcept { return t_start_; }
  double t_end() const noexcept { return t_end_; }
  int n_steps() const noexcept { return n_steps_; }
  double dt() const noexcept { return dt_; }
  double length() const noexcept { return t_end_ - t_start_; }

  double node(int i) const noexcept { return i == n_steps_ ? t_end_ : t_start_ + i * dt_; }

  /// Index of the node closest to t (clamped to the grid).
  int nearest_node(double t) const noexcept {
    const double s = std::round((t - t_start_) / dt_);
    return static_cast<int>(std::clamp(s, 0.0, static_cast<double>(n_steps_)));
  }

  /// The same grid restricted to [t_first, t_end].
  TimeGrid tail(int first) const {
    if (first < 0 || first >= n_steps_) throw ArgumentError("TimeGrid::tail: node index out of range");
    return TimeGrid(node(first), t_end_, n_steps_ - first);
  }

  /// Grid with dt halved `times` times.
  TimeGrid refined(int times) const { return TimeGrid(t_start_, t_end_, n_steps_ << times); }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.t_start_ == b.t_start_ && a.t_end_ == b.t_end_ && a.n_steps_ == b.n_steps_;
  }

 private:
  double t_start_;
  double t_end_;
  int n_steps_;
  double dt_;
};

/// Piecewise-constant control, one value per cell, acting only on (tau, t_end).
/// A cell straddling tau holds its value on the part after tau.
struct ControlTrajectory {
  TimeGrid grid;
  double tau;
  std::vector<Field> values;

  static ControlTrajectory zero(const TimeGrid& grid, double tau, int num_modes) {
    return {grid, tau, std::vector<Field>(grid.n_steps(), Field::zeros(num_modes))};
  }

  /// Start of the active part of cell i (clamped into the cell).
  double active_start(int i) const { return std::clamp(tau, grid.node(i), grid.node(i + 1)); }
  double active_length(int i) const { return grid.node(i + 1) - active_start(i); }
  bool active(int i) const { return active_length(i) > 0.0; }

  /// Essential sup over (tau, T) of ||u(t)||.
  double sup_norm() const {
    double m = 0.0;
    for (int i = 0; i < grid.n_steps(); ++i) {
      if (active(i)) m = std::max(m, values[i].norm());
    }
    return m;
  }
};

/// One state per grid node.
struct StateTrajectory {
  TimeGrid grid;
  std::vector<Field> states;

  const Field& initial() const { return states.front(); }
  const Field& terminal() const { return states.back(); }
};

/// (1 - exp(-mu*len)) / mu, accurate for small mu*len.
inline Eigen::ArrayXd source_gain(const SpectralDomain& domain, double len) {
  const Eigen::ArrayXd& mu = domain.eigenvalues().array();
  return (-(-mu * len).unaryExpr([](double v) { return std::expm1(v); })) / mu;
}

/// Column i holds the integral over the active part of cell i of e^{-mu (T - s)} ds.
/// Then y(T) = e^{(T - t_start) Laplacian} y0 + sum_i w_i .* (G u_i), and the
/// cell integral of the adjoint e^{(T-s) Laplacian} q is w_i .* q.
inline Eigen::MatrixXd cell_weights(const SpectralDomain& domain, const TimeGrid& grid, double tau) {
  const int n = grid.n_steps();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(domain.num_modes(), n);
  const double T = grid.t_end();
  for (int i = 0; i < n; ++i) {
    const double hi = grid.node(i + 1);
    const double lo = std::clamp(tau, grid.node(i), hi);
    if (hi - lo <= 0.0) continue;
    w.col(i) = (source_gain(domain, hi - lo) * (-domain.eigenvalues().array() * (T - hi)).exp()).matrix();
  }
  return w;
}

/// Exact variation-of-constants solve of y' = Laplacian y + chi_omega chi_(tau,T) u.
inline StateTrajectory solve_forward(const SpectralDomain& domain, const TimeGrid& grid, const Field& y0,
                                     const ControlTrajectory& control) {
  domain.require_size(y0, "solve_forward");
  if (!(control.grid == grid)) throw ArgumentError("solve_forward: control grid does not match state grid");
  if (static_cast<int>(control.values.size()) != grid.n_steps()) {
    throw ArgumentError("solve_forward: control has " + std::to_string(control.values.size()) +
                        " cell values, grid has " + std::to_string(grid.n_steps()) + " cells");
  }
  const Eigen::ArrayXd& mu = domain.eigenvalues().array();
  const Eigen::ArrayXd full_decay = (-mu * grid.dt()).exp();

  StateTrajectory out{grid, {}};
  out.states.reserve(grid.n_steps() + 1);
  out.states.push_back(y0);
  Eigen::ArrayXd y = y0.coeffs().array();
  for (int i = 0; i < grid.n_steps(); ++i) {
    domain.require_size(control.values[i], "solve_forward");
    const double len = control.active_length(i);
    if (len <= 0.0) {
      y *= full_decay;
    } else {
      const double idle = control.active_start(i) - grid.node(i);
      if (idle > 0.0) y *= (-mu * idle).exp();
      const Eigen::ArrayXd g = (domain.gram() * control.values[i].coeffs()).array();
      y = y * (-mu * len).exp() + g * source_gain(domain, len);
    }
    out.states.emplace_back(y.matrix());
  }
  return out;
}

/// p(t) = e^{(T - t) Laplacian} terminal at every node.
inline StateTrajectory solve_adjoint(const SpectralDomain& domain, const TimeGrid& grid, const Field& terminal) {
  domain.require_size(terminal, "solve_adjoint");
  StateTrajectory out{grid, {}};
  out.states.reserve(grid.n_steps() + 1);
  for (int i = 0; i < grid.n_steps(); ++i) out.states.push_back(propagate(domain, terminal, grid.t_end() - grid.node(i)));
  out.states.push_back(terminal);
  return out;
}

/// Discrete L2(0,T; L2) distance between two controls on the same grid,
/// integrating exactly over the (possibly different) activation windows.
inline double control_l2_distance(const ControlTrajectory& a, const ControlTrajectory& b) {
  if (!(a.grid == b.grid)) throw ArgumentError("control_l2_distance: grids differ");
  double acc = 0.0;
  for (int i = 0; i < a.grid.n_steps(); ++i) {
    const double sa = a.active_start(i);
    const double sb = b.active_start(i);
    const double end = a.grid.node(i + 1);
    const double both = end - std::max(sa, sb);
    const double only = std::max(sa, sb) - std::min(sa, sb);
    const double na = a.values[i].norm();
    const double nb = b.values[i].norm();
    if (both > 0.0) acc += both * (a.values[i] - b.values[i]).coeffs().squaredNorm();
    if (only > 0.0) acc += only * (sa < sb ? na * na : nb * nb);
  }
  return std::sqrt(acc);
}

}  // namespace heatctl
