#pragma once

// Numerical re-derivation of the structural properties of r(tau, M),
// M(r, tau), tau(M, r), their equivalence, and the optimality system.
// Every check is recorded with the error budget it was held to; nothing here
// throws on a failed property.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "heatctl/bvp.hpp"
#include "heatctl/config.hpp"
#include "heatctl/errors.hpp"
#include "heatctl/norm_search.hpp"
#include "heatctl/time_search.hpp"

namespace heatctl {

enum class CheckStatus { pass, warn, fail };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "PASS";
    case CheckStatus::warn: return "WARN";
    default: return "FAIL";
  }
}

/// kind "bound": PASS iff measured <= tolerance.
/// kind "margin": a strict inequality; PASS iff measured >= tolerance,
/// WARN if |measured| < tolerance, FAIL otherwise.
struct CheckRecord {
  std::string id;
  std::string anchor;
  std::string instance;
  std::string kind;
  double measured = 0.0;
  double tolerance = 0.0;
  CheckStatus status = CheckStatus::fail;
  std::string note;
};

struct VerificationReport {
  std::vector<CheckRecord> checks;

  int count(CheckStatus s) const {
    return static_cast<int>(std::count_if(checks.begin(), checks.end(), [s](const auto& c) { return c.status == s; }));
  }
  bool passed() const { return count(CheckStatus::fail) == 0; }

  void append(const VerificationReport& other) { checks.insert(checks.end(), other.checks.begin(), other.checks.end()); }

  void bound(std::string id, std::string anchor, std::string instance, double measured, double tolerance,
             std::string note = {}) {
    const auto st = (measured <= tolerance) ? CheckStatus::pass : CheckStatus::fail;
    checks.push_back({std::move(id), std::move(anchor), std::move(instance), "bound", measured, tolerance, st,
                      std::move(note)});
  }

  void margin(std::string id, std::string anchor, std::string instance, double measured, double margin_min,
              std::string note = {}) {
    CheckStatus st = CheckStatus::pass;
    if (measured < margin_min) st = std::abs(measured) < margin_min ? CheckStatus::warn : CheckStatus::fail;
    checks.push_back({std::move(id), std::move(anchor), std::move(instance), "margin", measured, margin_min, st,
                      std::move(note)});
  }

  /// A solver error inside a check is itself a failed check.
  void error(std::string id, std::string anchor, std::string instance, const std::exception& e) {
    checks.push_back({std::move(id), std::move(anchor), std::move(instance), "bound",
                      std::numeric_limits<double>::infinity(), 0.0, CheckStatus::fail, e.what()});
  }
};

struct VerifyPlan {
  SpectralDomain domain{Interval{0.2, 0.8}, 16};
  TimeGrid grid{0.0, 1.0, 200};
  Field y0;
  Field z_d;
  double tol_bvp = 1e-12;
  double tol_M = 1e-10;
  double tol_tau = 1e-12;
  std::uint64_t seed = 0;
  /// Bounds for the M-maps; the positive ones double as identity samples.
  std::vector<double> M_samples{0.0, 0.5, 1.0, 1.5, 2.0, 3.0};
  std::vector<double> tau_samples{0.0, 0.1, 0.25, 0.4, 0.55};
  /// Radii as fractions of r_T.
  std::vector<double> r_fractions{0.55, 0.65, 0.75, 0.85, 0.95};
  /// Radii as fractions of the way from r(0,M) to r_T.
  std::vector<double> tp_fractions{0.1, 0.3, 0.5, 0.7, 0.9};
  double tau_ref = 0.1;
  double M_ref = 2.0;
  int lipschitz_pairs = 10;
  int competitors = 100;
  int optimality_instances = 3;
};

inline VerifyPlan make_verify_plan(const ProblemConfig& c, int refine = 0) {
  VerifyPlan p;
  p.domain = make_domain(c);
  p.grid = make_grid(c, refine);
  p.y0 = initial_state(c);
  p.z_d = target_state(c);
  p.tol_bvp = c.tol_bvp;
  p.tol_M = c.tol_M;
  p.tol_tau = c.tol_tau;
  p.seed = c.seed;
  p.tau_ref = c.tau;
  p.M_ref = c.M > 0.0 ? c.M : p.M_ref;
  for (auto& t : p.tau_samples) t *= c.T;
  return p;
}

namespace detail {

inline std::string describe(std::initializer_list<std::pair<const char*, double>> kv) {
  std::string s;
  char buf[64];
  for (const auto& [k, v] : kv) {
    std::snprintf(buf, sizeof buf, "%s%s=%.6g", s.empty() ? "" : " ", k, v);
    s += buf;
  }
  return s;
}

struct Maps {
  const VerifyPlan& p;
  BvpOptions bvp() const { return {.tol = p.tol_bvp}; }
  double T() const { return p.grid.t_end(); }
  double r_T() const { return free_distance(p.domain, p.grid, p.y0, p.z_d); }
  BvpSolution op(double tau, double M) const { return solve_bvp(p.domain, p.grid, tau, M, p.y0, p.z_d, bvp()); }
  double r(double tau, double M) const { return op(tau, M).reach_distance; }
  NormResult np(double r, double tau) const {
    return optimal_norm(p.domain, p.grid, tau, r, p.y0, p.z_d, {.tol_M = p.tol_M, .bvp = bvp()});
  }
  TimeResult tp(double M, double r) const {
    return optimal_time(p.domain, p.grid, M, r, p.y0, p.z_d, {.tol_tau = p.tol_tau, .bvp = bvp()});
  }
  /// |d r / d M| at (tau, M), central difference.
  double slope_M(double tau, double M) const {
    const double h = 1e-4 * std::max(M, 1.0);
    const double lo = std::max(M - h, 0.0);
    return (r(tau, lo) - r(tau, M + h)) / (M + h - lo);
  }
};

inline double bang_bang_defect(const ControlTrajectory& u, double M) {
  double worst = 0.0;
  for (int i = 0; i < u.grid.n_steps(); ++i) {
    if (u.active(i)) worst = std::max(worst, std::abs(u.values[i].norm() - M));
  }
  return worst;
}

}  // namespace detail

/// Monotonicity, Lipschitz bound, r(tau,0) = r_T, and the six inverse identities.
inline VerificationReport check_monotone_maps(const VerifyPlan& p) {
  VerificationReport rep;
  const detail::Maps maps{p};
  const double T = maps.T();
  const double r_T = maps.r_T();
  using detail::describe;

  // r(tau, 0) = r_T and r(tau, .) strictly decreasing
  for (double tau : p.tau_samples) {
    const std::string inst = describe({{"tau", tau}});
    try {
      rep.bound("r_at_zero_bound", "r(tau,0) = r_T", inst, std::abs(maps.r(tau, 0.0) - r_T), 1e-12);
      std::vector<double> Ms = p.M_samples;
      std::sort(Ms.begin(), Ms.end());
      double prev = maps.r(tau, Ms.front());
      for (std::size_t k = 1; k < Ms.size(); ++k) {
        const double cur = maps.r(tau, Ms[k]);
        rep.margin("r_decreasing_in_M", "M -> r(tau,M) strictly decreasing",
                   describe({{"tau", tau}, {"M1", Ms[k - 1]}, {"M2", Ms[k]}}), prev - cur, 10 * p.tol_bvp);
        prev = cur;
      }
    } catch (const Error& e) {
      rep.error("r_decreasing_in_M", "M -> r(tau,M) strictly decreasing", inst, e);
    }
  }

  // Lipschitz in M with constant T - tau
  std::mt19937_64 rng(p.seed);
  const double M_hi = *std::max_element(p.M_samples.begin(), p.M_samples.end());
  std::uniform_real_distribution<double> uM(0.0, M_hi);
  std::uniform_int_distribution<std::size_t> utau(0, p.tau_samples.size() - 1);
  for (int k = 0; k < p.lipschitz_pairs; ++k) {
    const double tau = p.tau_samples[utau(rng)];
    const double M1 = uM(rng), M2 = uM(rng);
    const std::string inst = describe({{"tau", tau}, {"M1", M1}, {"M2", M2}});
    try {
      const double excess = std::abs(maps.r(tau, M1) - maps.r(tau, M2)) - (T - tau) * std::abs(M1 - M2);
      rep.bound("lipschitz_in_M", "|r(tau,M1) - r(tau,M2)| <= (T-tau)|M1-M2|", inst, excess, 1e-8);
    } catch (const Error& e) {
      rep.error("lipschitz_in_M", "|r(tau,M1) - r(tau,M2)| <= (T-tau)|M1-M2|", inst, e);
    }
  }

  // tau -> r(tau, M) strictly increasing, tau -> M(r, tau) strictly increasing
  {
    double prev = -1.0;
    for (std::size_t k = 0; k < p.tau_samples.size(); ++k) {
      const double tau = p.tau_samples[k];
      try {
        const double cur = maps.r(tau, p.M_ref);
        if (k > 0) {
          rep.margin("r_increasing_in_tau", "tau -> r(tau,M) strictly increasing",
                     describe({{"M", p.M_ref}, {"tau1", p.tau_samples[k - 1]}, {"tau2", tau}}), cur - prev,
                     10 * p.tol_bvp);
        }
        prev = cur;
      } catch (const Error& e) {
        rep.error("r_increasing_in_tau", "tau -> r(tau,M) strictly increasing", describe({{"tau", tau}}), e);
      }
    }
    const double r_mid = p.r_fractions[p.r_fractions.size() / 2] * r_T;
    double prev_M = -1.0;
    for (std::size_t k = 0; k < p.tau_samples.size(); ++k) {
      const double tau = p.tau_samples[k];
      try {
        const double cur = maps.np(r_mid, tau).M_star;
        if (k > 0) {
          rep.margin("M_increasing_in_tau", "tau -> M(r,tau) strictly increasing",
                     describe({{"r", r_mid}, {"tau1", p.tau_samples[k - 1]}, {"tau2", tau}}), cur - prev_M,
                     10 * p.tol_M);
        }
        prev_M = cur;
      } catch (const Error& e) {
        rep.error("M_increasing_in_tau", "tau -> M(r,tau) strictly increasing", describe({{"tau", tau}}), e);
      }
    }
  }

  const double tau = p.tau_ref;
  // r = r(tau, M(r, tau))
  for (double f : p.r_fractions) {
    const double r = f * r_T;
    const std::string inst = describe({{"tau", tau}, {"r", r}});
    try {
      const auto nr = maps.np(r, tau);
      rep.bound("identity_r_M_r", "r = r(tau, M(r,tau))", inst, std::abs(maps.r(tau, nr.M_star) - r),
                (T - tau) * p.tol_M + 2 * p.tol_bvp);
    } catch (const Error& e) {
      rep.error("identity_r_M_r", "r = r(tau, M(r,tau))", inst, e);
    }
  }
  // M = M(r(tau, M), tau)
  for (double M : p.M_samples) {
    if (M <= 0.0) continue;
    const std::string inst = describe({{"tau", tau}, {"M", M}});
    try {
      const double r = maps.r(tau, M);
      const double back = maps.np(r, tau).M_star;
      rep.bound("identity_M_r_M", "M = M(r(tau,M), tau)", inst, std::abs(back - M),
                p.tol_M + 2 * p.tol_bvp / maps.slope_M(tau, M));
    } catch (const Error& e) {
      rep.error("identity_M_r_M", "M = M(r(tau,M), tau)", inst, e);
    }
  }

  const double M = p.M_ref;
  double r0 = 0.0;
  try {
    r0 = maps.r(0.0, M);
  } catch (const Error& e) {
    rep.error("time_range", "r(0,M) defined", describe({{"M", M}}), e);
    return rep;
  }
  for (double f : p.tp_fractions) {
    const double r = r0 + f * (r_T - r0);
    const std::string inst = describe({{"M", M}, {"r", r}});
    try {
      const auto tr = maps.tp(M, r);
      // r = r(tau(M, r), M)
      rep.bound("identity_r_tau_r", "r = r(tau(M,r), M)", inst, std::abs(maps.r(tr.tau_star, M) - r),
                tr.local_slope * p.tol_tau + 2 * p.tol_bvp, describe({{"slope_tau", tr.local_slope}}));
      // M = M(r, tau(M, r))
      const double back = maps.np(r, tr.tau_star).M_star;
      rep.bound("identity_M_tau_M", "M = M(r, tau(M,r))", inst, std::abs(back - M),
                p.tol_M + (tr.local_slope * p.tol_tau + 2 * p.tol_bvp) / maps.slope_M(tr.tau_star, M));
    } catch (const Error& e) {
      rep.error("identity_r_tau_r", "r = r(tau(M,r), M)", inst, e);
    }
  }
  for (double t : p.tau_samples) {
    const std::string inst = describe({{"M", M}, {"tau", t}});
    try {
      // tau = tau(M, r(tau, M))
      const auto tr = maps.tp(M, maps.r(t, M));
      rep.bound("identity_tau_r_tau", "tau = tau(M, r(tau,M))", inst, std::abs(tr.tau_star - t),
                p.tol_tau + 2 * p.tol_bvp / tr.local_slope, describe({{"slope_tau", tr.local_slope}}));
    } catch (const Error& e) {
      rep.error("identity_tau_r_tau", "tau = tau(M, r(tau,M))", inst, e);
    }
    // tau = tau(M(r, tau), r)
    const double r = p.r_fractions[p.r_fractions.size() / 2] * r_T;
    const std::string inst2 = describe({{"r", r}, {"tau", t}});
    try {
      const auto nr = maps.np(r, t);
      const auto tr = maps.tp(nr.M_star, r);
      rep.bound("identity_tau_M_tau", "tau = tau(M(r,tau), r)", inst2, std::abs(tr.tau_star - t),
                p.tol_tau + ((T - t) * p.tol_M + 2 * p.tol_bvp) / tr.local_slope,
                describe({{"slope_tau", tr.local_slope}}));
    } catch (const Error& e) {
      rep.error("identity_tau_M_tau", "tau = tau(M(r,tau), r)", inst2, e);
    }
  }
  return rep;
}

/// The three problems share one optimal control: cycles started from OP,
/// from NP and from TP.
inline VerificationReport check_equivalence(const VerifyPlan& p) {
  VerificationReport rep;
  const detail::Maps maps{p};
  const double r_T = maps.r_T();
  using detail::describe;
  const double bb_tol = 1e-8;

  auto compare = [&](const std::string& cycle, const std::string& inst, double M, const ControlTrajectory& op,
                     double M_op, const ControlTrajectory& np, double M_np, const ControlTrajectory& tp,
                     double M_tp) {
    const double d = std::max({control_l2_distance(op, np), control_l2_distance(op, tp), control_l2_distance(np, tp)});
    rep.bound("equivalence_" + cycle, "OP, NP and TP share one optimal control", inst, d, 1e-5 * M);
    rep.bound("bang_bang_op", "||u(t)|| = M on (tau,T)", inst, detail::bang_bang_defect(op, M_op), bb_tol * M_op);
    rep.bound("bang_bang_np", "||u(t)|| = M on (tau,T)", inst, detail::bang_bang_defect(np, M_np), bb_tol * M_np);
    rep.bound("bang_bang_tp", "||u(t)|| = M on (tau,T)", inst, detail::bang_bang_defect(tp, M_tp), bb_tol * M_tp);
  };

  std::vector<double> Ms;
  for (double M : p.M_samples) {
    if (M > 0.0) Ms.push_back(M);
  }
  const std::size_t n = std::min({Ms.size(), p.tau_samples.size(), p.r_fractions.size()});

  // from OP: (tau, M) -> r = r(tau,M); NP at (r, tau); TP at (M, r)
  for (std::size_t k = 0; k < n; ++k) {
    const double tau = p.tau_samples[k], M = Ms[k];
    const std::string inst = describe({{"tau", tau}, {"M", M}});
    try {
      const auto op = maps.op(tau, M);
      const auto np = maps.np(op.reach_distance, tau);
      const auto tp = maps.tp(M, op.reach_distance);
      compare("from_op", inst, M, op.control, M, np.control, np.M_star, tp.control, M);
    } catch (const Error& e) {
      rep.error("equivalence_from_op", "OP, NP and TP share one optimal control", inst, e);
    }
  }
  // from NP: (r, tau) -> M = M(r,tau); OP at (tau, M); TP at (M, r)
  for (std::size_t k = 0; k < n; ++k) {
    const double tau = p.tau_samples[k], r = p.r_fractions[k] * r_T;
    const std::string inst = describe({{"tau", tau}, {"r", r}});
    try {
      const auto np = maps.np(r, tau);
      const auto op = maps.op(tau, np.M_star);
      const auto tp = maps.tp(np.M_star, r);
      compare("from_np", inst, np.M_star, op.control, np.M_star, np.control, np.M_star, tp.control, np.M_star);
    } catch (const Error& e) {
      rep.error("equivalence_from_np", "OP, NP and TP share one optimal control", inst, e);
    }
  }
  // from TP: (M, r) -> tau = tau(M,r); OP at (tau, M); NP at (r, tau)
  for (std::size_t k = 0; k < n; ++k) {
    const double M = Ms[k];
    try {
      const double r0 = maps.r(0.0, M);
      const double r = r0 + p.tp_fractions[k] * (r_T - r0);
      const std::string inst = describe({{"M", M}, {"r", r}});
      try {
        const auto tp = maps.tp(M, r);
        const auto op = maps.op(tp.tau_star, M);
        const auto np = maps.np(r, tp.tau_star);
        compare("from_tp", inst, M, op.control, M, np.control, np.M_star, tp.control, M);
      } catch (const Error& e) {
        rep.error("equivalence_from_tp", "OP, NP and TP share one optimal control", inst, e);
      }
    } catch (const Error& e) {
      rep.error("equivalence_from_tp", "OP, NP and TP share one optimal control", describe({{"M", M}}), e);
    }
  }

  // r = r_T: the null control is optimal for NP
  {
    const double tau = p.tau_ref;
    const std::string inst = describe({{"tau", tau}, {"r", r_T}});
    try {
      const auto np = maps.np(r_T, tau);
      const auto op = maps.op(tau, np.M_star);
      rep.bound("degenerate_radius", "M(r_T,tau) = 0 with the null control", inst,
                np.M_star + np.control.sup_norm() + std::abs(op.reach_distance - r_T), 1e-12);
    } catch (const Error& e) {
      rep.error("degenerate_radius", "M(r_T,tau) = 0 with the null control", inst, e);
    }
  }
  return rep;
}

/// Maximum condition against random admissible competitors, and the NP
/// characterization: terminal distance r, bang-bang form along psi, state = phi.
inline VerificationReport check_optimality_system(const VerifyPlan& p) {
  VerificationReport rep;
  const detail::Maps maps{p};
  const double r_T = maps.r_T();
  const int N = p.domain.num_modes();
  const double T = maps.T();
  using detail::describe;
  std::mt19937_64 rng(p.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int count = std::min<int>(p.optimality_instances, static_cast<int>(std::min(p.tau_samples.size(), p.r_fractions.size())));
  for (int k = 0; k < count; ++k) {
    const double tau = p.tau_samples[k];
    const double r = p.r_fractions[k] * r_T;
    const std::string inst = describe({{"tau", tau}, {"r", r}});
    try {
      const auto np = maps.np(r, tau);
      const auto& s = *np.solution;
      const double M = np.M_star;
      rep.margin("np_norm_positive", "M* > 0", inst, M, 10 * p.tol_M);
      rep.bound("np_terminal_distance", "||y*(T) - z_d|| = r", inst, std::abs(s.reach_distance - r),
                (T - tau) * p.tol_M + 2 * p.tol_bvp);

      // u* = M chi_omega psi / ||chi_omega psi|| with psi from the BVP at M*
      double form = 0.0;
      for (int i = 0; i < p.grid.n_steps(); ++i) {
        if (!np.control.active(i)) continue;
        const double len = np.control.active_length(i);
        const Field avg((source_gain(p.domain, len) * s.psi.states[i + 1].coeffs().array()).matrix() / len);
        const Field g = apply_mask(p.domain, avg);
        form = std::max(form, (np.control.values[i] - (M / g.norm()) * g).norm());
      }
      rep.bound("np_control_form", "u* = M* chi_omega psi / ||chi_omega psi||", inst, form, 10 * p.tol_bvp * std::max(M, 1.0));

      const auto y = solve_forward(p.domain, p.grid, p.y0, np.control);
      double dev = 0.0;
      for (int i = 0; i <= p.grid.n_steps(); ++i) dev = std::max(dev, (y.states[i] - s.phi.states[i]).norm());
      rep.bound("np_state_is_phi", "y* = phi", inst, dev, 10 * p.tol_bvp);

      // maximum condition: int <chi_omega psi, u* - v> >= 0, by duality <psi(T), y(T;u*,0) - y(T;v,0)>
      const Field zero = Field::zeros(N);
      const Field yu = solve_forward(p.domain, p.grid, zero, np.control).terminal();
      double worst = std::numeric_limits<double>::infinity();
      for (int c = 0; c < p.competitors; ++c) {
        auto v = ControlTrajectory::zero(p.grid, tau, N);
        for (int i = 0; i < p.grid.n_steps(); ++i) {
          if (!v.active(i)) continue;
          Field f = Field::zeros(N);
          for (int m = 0; m < N; ++m) f.coeffs()[m] = gauss(rng);
          v.values[i] = (M * unit(rng) / f.norm()) * f;
        }
        const Field yv = solve_forward(p.domain, p.grid, zero, v).terminal();
        worst = std::min(worst, dot(s.psi.terminal(), yu - yv));
      }
      rep.bound("maximum_condition", "int <chi_omega psi, u* - v> dt >= 0 for admissible v", inst,
                std::max(0.0, -worst), 1e-8, describe({{"min_gap", worst}}));
    } catch (const Error& e) {
      rep.error("np_optimality", "optimality system of the norm problem", inst, e);
    }
  }
  return rep;
}

inline VerificationReport verify_all(const VerifyPlan& p) {
  VerificationReport rep = check_monotone_maps(p);
  rep.append(check_equivalence(p));
  rep.append(check_optimality_system(p));
  return rep;
}

}  // namespace heatctl
