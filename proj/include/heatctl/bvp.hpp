#pragma once

// Forward-backward two-point boundary-value problem of the optimal target
// control problem
//
//   phi' - Laplacian phi = M chi_(tau,T) chi_omega psi / ||chi_omega psi||,   phi(t_start) = y0,
//   psi' + Laplacian psi = 0,                                                psi(T) = -(phi(T) - z_d),
//
// discretized with piecewise-constant controls. On each active cell the
// control is M * G psibar_i / ||G psibar_i||, psibar_i being the average of
// psi over the active part of the cell. This is the exact optimality system of
// the discrete problem min ||y(T) - z_d|| subject to ||u_i|| <= M.
//
// The solve is a fixed point in q = psi(T) alone. It is found by a short
// conditional-gradient run on J(u) = 1/2 ||y(T;u) - z_d||^2 followed by a
// damped Newton ascent on the concave dual
//
//   D(q) = <q, z_d - a> - 1/2 ||q||^2 - M sum_i ||G (w_i .* q)||,
//
// whose gradient is z_d - y(T; u(q)) - q, i.e. the terminal-coupling residual.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "heatctl/errors.hpp"
#include "heatctl/spectral.hpp"
#include "heatctl/trajectory.hpp"

namespace heatctl {

struct BvpOptions {
  /// Bound on both the terminal residual and the conditional-gradient duality gap.
  double tol = 1e-12;
  int max_iter = 200;
  /// Conditional-gradient iterations before switching to Newton.
  int fw_iters = 25;
  /// Starting value for psi(T); skips the conditional-gradient phase.
  std::optional<Field> initial_terminal;
};

struct BvpSolution {
  double tau = 0.0;
  double M = 0.0;
  StateTrajectory phi;
  StateTrajectory psi;
  ControlTrajectory control;
  /// r(tau, M) = ||phi(T) - z_d||.
  double reach_distance = 0.0;
  /// r_T = ||e^{(T - t_start) Laplacian} y0 - z_d||.
  double free_distance = 0.0;
  int iterations = 0;
  int fw_iterations = 0;
  /// ||psi(T) + phi(T) - z_d||.
  double residual = 0.0;
  double duality_gap = 0.0;
  /// min over active cells of ||G psibar_i|| / ||psi(T)||.
  double min_masked_adjoint = std::numeric_limits<double>::infinity();
};

/// r_T for a problem posed on `grid` with initial state y0 at grid.t_start().
inline double free_distance(const SpectralDomain& domain, const TimeGrid& grid, const Field& y0, const Field& z_d) {
  return (propagate(domain, y0, grid.length()) - z_d).norm();
}

namespace detail {

constexpr double kAdjointFloor = 1e-12;
constexpr double kCollapseFloor = 1e-12;

class TerminalCoupling {
 public:
  struct Eval {
    Eigen::VectorXd q;
    Eigen::VectorXd residual;  // z_d - y(T; u(q)) - q
    Eigen::VectorXd cell_norms;
    Eigen::MatrixXd dirs;
    double dual = 0.0;
    bool ok = false;
  };

  TerminalCoupling(const SpectralDomain& domain, const TimeGrid& grid, double tau, double M, const Field& y0,
                   const Field& z_d)
      : G_(domain.gram()), G2_(domain.gram_squared()), M_(M) {
    const Eigen::MatrixXd all = cell_weights(domain, grid, tau);
    for (int i = 0; i < grid.n_steps(); ++i) {
      const double len = grid.node(i + 1) - std::clamp(tau, grid.node(i), grid.node(i + 1));
      if (len > 0.0) {
        cells_.push_back(i);
        lengths_.push_back(len);
      }
    }
    W_.resize(domain.num_modes(), static_cast<Eigen::Index>(cells_.size()));
    for (std::size_t j = 0; j < cells_.size(); ++j) W_.col(j) = all.col(cells_[j]);
    a_ = propagate(domain, y0, grid.length()).coeffs();
    z_ = z_d.coeffs();
    c_ = z_ - a_;
    scale_ = z_.norm() + a_.norm() + M_ * (G_ * W_).colwise().norm().sum();
  }

  const std::vector<int>& cells() const { return cells_; }
  const std::vector<double>& lengths() const { return lengths_; }
  const Eigen::VectorXd& free_gap() const { return c_; }
  double scale() const { return scale_; }

  Eigen::VectorXd terminal_of(const Eigen::MatrixXd& U) const {
    return a_ + (W_.array() * (G_ * U).array()).rowwise().sum().matrix();
  }

  Eval evaluate(const Eigen::VectorXd& q) const {
    Eval e;
    e.q = q;
    const Eigen::MatrixXd A = G_ * (W_.array().colwise() * q.array()).matrix();
    e.cell_norms = A.colwise().norm().transpose();
    if (!e.cell_norms.allFinite() || (e.cell_norms.array() <= 0.0).any()) return e;
    e.dirs = A.array().rowwise() / e.cell_norms.transpose().array();
    e.residual = z_ - terminal_of(M_ * e.dirs) - q;
    e.dual = q.dot(c_) - 0.5 * q.squaredNorm() - M_ * e.cell_norms.sum();
    e.ok = e.residual.allFinite() && std::isfinite(e.dual);
    return e;
  }

  /// Negated dual Hessian, I + M sum_i (B_i B_i^T - v_i v_i^T) / ||B_i^T q||.
  Eigen::MatrixXd curvature(const Eval& e) const {
    const Eigen::ArrayXd inv = e.cell_norms.array().inverse();
    const Eigen::MatrixXd S = (W_.array().rowwise() * inv.transpose()).matrix() * W_.transpose();
    const Eigen::MatrixXd V = (W_.array() * (G_ * e.dirs).array()).matrix();
    const Eigen::MatrixXd VV = (V.array().rowwise() * inv.transpose()).matrix() * V.transpose();
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(G_.rows(), G_.cols()) + M_ * (G2_.cwiseProduct(S) - VV);
    return 0.5 * (H + H.transpose());
  }

  /// Conditional-gradient gap of the control u(q) against its own adjoint.
  double gap(const Eval& e) const {
    const Eigen::VectorXd qhat = e.q + e.residual;
    const Eigen::MatrixXd A = G_ * (W_.array().colwise() * qhat.array()).matrix();
    return M_ * (A.colwise().norm().sum() - (A.array() * e.dirs.array()).sum());
  }

  /// Frank-Wolfe on J(u) from u = 0 with exact line search; returns z_d - y(T; u).
  Eigen::VectorXd conditional_gradient(int iters, double tol, int& done) const {
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(W_.rows(), W_.cols());
    Eigen::VectorXd y = a_;
    done = 0;
    for (; done < iters; ++done) {
      const Eigen::VectorXd p = z_ - y;
      const Eigen::MatrixXd A = G_ * (W_.array().colwise() * p.array()).matrix();
      const Eigen::ArrayXd nr = A.colwise().norm().transpose().array();
      if ((nr <= 0.0).any() || !nr.allFinite()) break;
      const Eigen::MatrixXd S = M_ * (A.array().rowwise() / nr.transpose()).matrix();
      const double g = (A.array() * (S - U).array()).sum();
      if (g <= tol) break;
      const Eigen::VectorXd d = terminal_of(S) - y;
      const double dd = d.squaredNorm();
      if (dd <= 0.0) break;
      const double step = std::clamp(p.dot(d) / dd, 0.0, 1.0);
      U += step * (S - U);
      y += step * d;
    }
    return z_ - y;
  }

 private:
  Eigen::MatrixXd G_;
  Eigen::MatrixXd G2_;
  Eigen::MatrixXd W_;
  std::vector<int> cells_;
  std::vector<double> lengths_;
  Eigen::VectorXd a_;
  Eigen::VectorXd z_;
  Eigen::VectorXd c_;
  double M_;
  double scale_ = 1.0;
};

}  // namespace detail

/// Solves the two-point BVP for (tau, M) and returns the optimal target
/// control, state and adjoint. Throws DegenerateTargetError when r_T = 0 or
/// the target is exactly attainable, DegenerateAdjointError when
/// ||chi_omega psi|| vanishes on an active cell, ConvergenceError otherwise.
inline BvpSolution solve_bvp(const SpectralDomain& domain, const TimeGrid& grid, double tau, double M,
                             const Field& y0, const Field& z_d, const BvpOptions& options = {}) {
  domain.require_size(y0, "solve_bvp");
  domain.require_size(z_d, "solve_bvp");
  if (!(tau >= grid.t_start() && tau < grid.t_end())) throw ArgumentError("solve_bvp: tau must lie in [t_start, T)");
  if (!(M >= 0.0) || !std::isfinite(M)) throw ArgumentError("solve_bvp: M must be finite and >= 0");
  if (!(options.tol > 0.0)) throw ArgumentError("solve_bvp: tol must be > 0");

  const int N = domain.num_modes();
  BvpSolution sol;
  sol.tau = tau;
  sol.M = M;
  sol.free_distance = free_distance(domain, grid, y0, z_d);
  if (sol.free_distance <= 1e-14 * std::max(1.0, z_d.norm())) {
    throw DegenerateTargetError("solve_bvp: free terminal state already equals the target (r_T = 0)");
  }

  sol.control = ControlTrajectory::zero(grid, tau, N);
  if (M == 0.0) {
    sol.phi = solve_forward(domain, grid, y0, sol.control);
    const Field q = z_d - sol.phi.terminal();
    sol.psi = solve_adjoint(domain, grid, q);
    sol.reach_distance = q.norm();
    return sol;
  }

  detail::TerminalCoupling tc(domain, grid, tau, M, y0, z_d);
  const double r_T = sol.free_distance;
  const double tol = std::max(options.tol, 64.0 * std::numeric_limits<double>::epsilon() * tc.scale());

  Eigen::VectorXd q0;
  if (options.initial_terminal && options.initial_terminal->size() == N && options.initial_terminal->norm() > 0.0) {
    q0 = options.initial_terminal->coeffs();
  } else {
    q0 = tc.conditional_gradient(options.fw_iters, tol, sol.fw_iterations);
  }
  auto e = tc.evaluate(q0);
  if (!e.ok) e = tc.evaluate(tc.free_gap());
  if (!e.ok) throw DegenerateAdjointError("solve_bvp: adjoint vanishes on an active cell at the initial iterate");

  double lambda = 1e-8;
  bool converged = false;
  int newton = 0;
  double gap = 0.0;
  for (; newton <= options.max_iter; ++newton) {
    if (e.q.norm() < detail::kCollapseFloor * r_T) {
      throw DegenerateTargetError("solve_bvp: target is attainable with this bound (r(tau,M) = 0)");
    }
    const double res = e.residual.norm();
    gap = tc.gap(e);
    if (res <= tol && gap <= tol) {
      converged = true;
      break;
    }
    if (newton == options.max_iter) break;
    const Eigen::MatrixXd H = tc.curvature(e);
    const Eigen::VectorXd Hdiag = H.diagonal();
    while (true) {
      Eigen::MatrixXd Hd = H;
      Hd.diagonal() += lambda * Hdiag;
      const Eigen::VectorXd step = Hd.llt().solve(e.residual);
      const double predicted = e.residual.dot(step) - 0.5 * step.dot(H * step);
      auto trial = tc.evaluate(e.q + step);
      if (trial.ok) {
        const double ratio = predicted > 0.0 ? (trial.dual - e.dual) / predicted : -1.0;
        const bool flat = std::abs(trial.dual - e.dual) <= 1e-14 * std::max(std::abs(e.dual), 1e-300);
        if (ratio > 1e-4 || (flat && trial.residual.norm() < res)) {
          e = std::move(trial);
          if (ratio > 0.75) lambda = std::max(lambda / 10.0, 1e-12);
          break;
        }
      }
      lambda *= 10.0;
      if (lambda > 1e16) throw ConvergenceError("solve_bvp: Newton iteration stalled", res);
    }
  }
  if (!converged) throw ConvergenceError("solve_bvp: no convergence within max_iter", e.residual.norm());

  const auto& cells = tc.cells();
  const auto& lengths = tc.lengths();
  const double qnorm = e.q.norm();
  for (std::size_t j = 0; j < cells.size(); ++j) {
    const double ratio = e.cell_norms[j] / lengths[j] / qnorm;
    sol.min_masked_adjoint = std::min(sol.min_masked_adjoint, ratio);
    if (ratio < detail::kAdjointFloor) {
      throw DegenerateAdjointError("solve_bvp: ||chi_omega psi|| below floor on cell " + std::to_string(cells[j]));
    }
    sol.control.values[cells[j]] = Field(M * e.dirs.col(j));
  }
  sol.phi = solve_forward(domain, grid, y0, sol.control);
  sol.psi = solve_adjoint(domain, grid, Field(e.q));
  sol.reach_distance = (sol.phi.terminal() - z_d).norm();
  sol.residual = (sol.psi.terminal() + sol.phi.terminal() - z_d).norm();
  sol.duality_gap = gap;
  sol.iterations = sol.fw_iterations + newton;
  return sol;
}

/// r(tau, M).
inline double reach_distance(const SpectralDomain& domain, const TimeGrid& grid, double tau, double M,
                             const Field& y0, const Field& z_d, const BvpOptions& options = {}) {
  return solve_bvp(domain, grid, tau, M, y0, z_d, options).reach_distance;
}

}  // namespace heatctl
