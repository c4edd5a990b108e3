#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "heatctl/bvp.hpp"
#include "support/instances.hpp"
#include "support/oracle_op.hpp"

using namespace heatctl;
using heatctl::testing::desk_instance;
using heatctl::testing::small_instance;

namespace {

double bang_bang_defect(const BvpSolution& s) {
  double worst = 0.0;
  for (int i = 0; i < s.control.grid.n_steps(); ++i) {
    if (s.control.active(i)) worst = std::max(worst, std::abs(s.control.values[i].norm() - s.M));
  }
  return worst;
}

}  // namespace

TEST(SolveBvp, ZeroBoundIsFreeFlow) {
  const auto in = desk_instance(8, 40);
  const auto s = solve_bvp(in.domain, in.grid, 0.0, 0.0, in.y0, in.z_d);
  EXPECT_NEAR(s.reach_distance, s.free_distance, 1e-12);
  const Field q = in.z_d - propagate(in.domain, in.y0, 1.0);
  for (int i = 0; i <= 40; ++i) {
    EXPECT_LE((s.phi.states[i] - propagate(in.domain, in.y0, in.grid.node(i))).norm(), 1e-15);
    EXPECT_LE((s.psi.states[i] - propagate(in.domain, q, 1.0 - in.grid.node(i))).norm(), 1e-15);
  }
  EXPECT_EQ(s.control.sup_norm(), 0.0);
}

TEST(SolveBvp, FreeFlowHittingTargetIsDegenerate) {
  const auto in = desk_instance(8, 40);
  const Field z = propagate(in.domain, in.y0, 1.0);
  EXPECT_THROW(solve_bvp(in.domain, in.grid, 0.0, 1.0, in.y0, z), DegenerateTargetError);
  EXPECT_THROW(solve_bvp(in.domain, in.grid, 0.0, 0.0, in.y0, z), DegenerateTargetError);
}

TEST(SolveBvp, AttainableTargetIsDegenerate) {
  // a smooth target inside the reachable set at this bound
  const auto d = SpectralDomain({0.2, 0.8}, 4);
  const TimeGrid grid(0.0, 1.0, 40);
  const Field y0 = Field::mode(4, 1);
  const Field z = 0.01 * Field::mode(4, 1);
  EXPECT_THROW(solve_bvp(d, grid, 0.0, 50.0, y0, z), DegenerateTargetError);
}

TEST(SolveBvp, VanishingMaskedAdjointIsReported) {
  // a large bound drives the low modes of psi(T) to zero; the early-time
  // adjoint then lives in the first mode only and falls under the floor
  const auto in = desk_instance();
  EXPECT_THROW(solve_bvp(in.domain, in.grid, 0.0, 12.0, in.y0, in.z_d), DegenerateAdjointError);
  const auto s = solve_bvp(in.domain, in.grid, 0.0, 4.0, in.y0, in.z_d);
  EXPECT_GT(s.min_masked_adjoint, 1e-12);
}

TEST(SolveBvp, SmallInstanceMatchesOracle) {
  const auto in = small_instance(40);
  const auto s = solve_bvp(in.domain, in.grid, 0.0, 1.0, in.y0, in.z_d);
  const auto o = heatctl::testing::oracle_op(in.domain, in.grid, 0.0, 1.0, in.y0, in.z_d);
  EXPECT_NEAR(s.reach_distance, std::sqrt(o.value), 1e-6 * (1 + o.value));
  EXPECT_LE(control_l2_distance(s.control, o.control), 1e-4);
}

TEST(SolveBvp, OptimalitySystemHolds) {
  const auto in = desk_instance();
  const double tol = 1e-12;
  for (double tau : {0.0, 0.3, 0.512}) {
    for (double M : {0.5, 2.0, 10.0}) {
      const auto s = solve_bvp(in.domain, in.grid, tau, M, in.y0, in.z_d, {.tol = tol});
      EXPECT_LE((s.psi.terminal() + s.phi.terminal() - in.z_d).norm(), s.residual + 1e-15);
      EXPECT_LE(s.residual, 1e-11) << tau << " " << M;
      EXPECT_LE(bang_bang_defect(s), 1e-12 * M);
      EXPECT_DOUBLE_EQ(s.reach_distance, (s.phi.terminal() - in.z_d).norm());
      EXPECT_LT(s.reach_distance, s.free_distance);
      for (int i = 0; i < in.grid.n_steps(); ++i) {
        if (!s.control.active(i)) EXPECT_EQ(s.control.values[i].norm(), 0.0);
      }
    }
  }
}

TEST(SolveBvp, FixedPointConsistency) {
  const auto in = desk_instance();
  const auto s = solve_bvp(in.domain, in.grid, 0.2, 3.0, in.y0, in.z_d);
  const auto psi = solve_adjoint(in.domain, in.grid, in.z_d - s.phi.terminal());
  auto u = ControlTrajectory::zero(in.grid, 0.2, 16);
  for (int i = 0; i < in.grid.n_steps(); ++i) {
    if (!u.active(i)) continue;
    // cell average of psi over the active part, masked
    const double len = u.active_length(i);
    const Eigen::VectorXd w = source_gain(in.domain, len).matrix();
    const Field avg(Eigen::VectorXd(w.cwiseProduct(psi.states[i + 1].coeffs()) / len));
    const Field g = apply_mask(in.domain, avg);
    u.values[i] = (3.0 / g.norm()) * g;
  }
  const auto phi = solve_forward(in.domain, in.grid, in.y0, u);
  for (int i = 0; i <= in.grid.n_steps(); ++i) EXPECT_LE((phi.states[i] - s.phi.states[i]).norm(), 1e-10);
}

TEST(SolveBvp, MaximumConditionAgainstRandomCompetitors) {
  const auto in = desk_instance();
  std::mt19937_64 rng(11);
  const double M = 2.0, tau = 0.1;
  const auto s = solve_bvp(in.domain, in.grid, tau, M, in.y0, in.z_d);
  const Field zero = Field::zeros(16);
  const Field yu = solve_forward(in.domain, in.grid, zero, s.control).terminal();
  for (int trial = 0; trial < 100; ++trial) {
    const auto v = heatctl::testing::random_admissible(rng, in.grid, tau, M, 16);
    const Field yv = solve_forward(in.domain, in.grid, zero, v).terminal();
    EXPECT_GE(dot(s.psi.terminal(), yu - yv), -1e-12);
  }
}

TEST(SolveBvp, DynamicProgrammingTail) {
  const auto in = desk_instance();
  const auto s = solve_bvp(in.domain, in.grid, 0.0, 2.0, in.y0, in.z_d);
  for (int first : {40, 100, 170}) {
    const auto t = solve_bvp(in.domain, in.grid.tail(first), 0.0 + in.grid.node(first), 2.0, s.phi.states[first], in.z_d);
    for (int i = 0; i <= in.grid.n_steps() - first; ++i) {
      EXPECT_LE((t.phi.states[i] - s.phi.states[first + i]).norm(), 1e-10);
      EXPECT_LE((t.psi.states[i] - s.psi.states[first + i]).norm(), 1e-10);
    }
  }
}

TEST(SolveBvp, WarmStartAgrees) {
  const auto in = desk_instance();
  const auto cold = solve_bvp(in.domain, in.grid, 0.25, 4.0, in.y0, in.z_d);
  BvpOptions opts;
  opts.initial_terminal = 1.3 * cold.psi.terminal();
  const auto warm = solve_bvp(in.domain, in.grid, 0.25, 4.0, in.y0, in.z_d, opts);
  EXPECT_LE(std::abs(warm.reach_distance - cold.reach_distance), 1e-11);
  EXPECT_LE((warm.psi.terminal() - cold.psi.terminal()).norm(), 1e-11);
}

TEST(ReachDistance, DecreasingAndLipschitzInBound) {
  const auto in = desk_instance();
  const double tau = 0.2;
  double prev = reach_distance(in.domain, in.grid, tau, 0.0, in.y0, in.z_d);
  double prev_M = 0.0;
  for (double M : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    const double r = reach_distance(in.domain, in.grid, tau, M, in.y0, in.z_d);
    EXPECT_LT(r, prev);
    EXPECT_LE(prev - r, (1.0 - tau) * (M - prev_M) + 1e-12);
    prev = r;
    prev_M = M;
  }
}

TEST(ReachDistance, IncreasingAndContinuousInActivation) {
  const auto in = desk_instance();
  double prev = 0.0;
  for (double tau : {0.0, 0.1, 0.2011, 0.2013, 0.5, 0.9}) {
    const double r = reach_distance(in.domain, in.grid, tau, 2.0, in.y0, in.z_d);
    EXPECT_GT(r, prev);
    prev = r;
  }
  const double a = reach_distance(in.domain, in.grid, 0.3, 2.0, in.y0, in.z_d);
  const double b = reach_distance(in.domain, in.grid, 0.3 + 1e-9, 2.0, in.y0, in.z_d);
  EXPECT_LE(b - a, 1e-8);
  EXPECT_GE(b - a, 0.0);
}

TEST(SolveBvp, RejectsBadArguments) {
  const auto in = desk_instance(8, 40);
  EXPECT_THROW(solve_bvp(in.domain, in.grid, 1.0, 1.0, in.y0, in.z_d), ArgumentError);
  EXPECT_THROW(solve_bvp(in.domain, in.grid, -0.1, 1.0, in.y0, in.z_d), ArgumentError);
  EXPECT_THROW(solve_bvp(in.domain, in.grid, 0.0, -1.0, in.y0, in.z_d), ArgumentError);
  EXPECT_THROW(solve_bvp(in.domain, in.grid, 0.0, 1.0, in.y0, in.z_d, {.tol = 0.0}), ArgumentError);
  EXPECT_THROW(solve_bvp(in.domain, in.grid, 0.0, 1.0, Field::zeros(7), in.z_d), ArgumentError);
}

TEST(SolveBvp, IterationBudgetExhaustion) {
  const auto in = desk_instance();
  BvpOptions opts;
  opts.max_iter = 0;
  opts.fw_iters = 0;
  try {
    solve_bvp(in.domain, in.grid, 0.0, 5.0, in.y0, in.z_d, opts);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.last_residual(), 1e-12);
  }
}
