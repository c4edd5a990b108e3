#include <stdexcept>

#include <gtest/gtest.h>

#include "heatctl/io.hpp"
#include "heatctl/verify.hpp"
#include "support/instances.hpp"

using namespace heatctl;

namespace {

// a lighter plan: fewer cells and samples, same structure
VerifyPlan light_plan() {
  const auto in = heatctl::testing::desk_instance(16, 100);
  VerifyPlan p;
  p.domain = in.domain;
  p.grid = in.grid;
  p.y0 = in.y0;
  p.z_d = in.z_d;
  p.tol_M = 1e-13;
  p.M_samples = {0.0, 1.0, 2.0};
  p.tau_samples = {0.0, 0.3};
  p.r_fractions = {0.6, 0.9};
  p.tp_fractions = {0.3, 0.7};
  p.lipschitz_pairs = 4;
  p.competitors = 20;
  p.optimality_instances = 1;
  return p;
}

}  // namespace

TEST(Report, BoundAndMarginStatuses) {
  VerificationReport rep;
  rep.bound("a", "", "", 1e-9, 1e-8);
  rep.bound("b", "", "", 2e-8, 1e-8);
  rep.bound("c", "", "", 1e-8, 1e-8);
  rep.margin("d", "", "", 0.5, 1e-12);
  rep.margin("e", "", "", -1e-13, 1e-12);
  rep.margin("f", "", "", -1e-3, 1e-12);
  rep.error("g", "", "", std::runtime_error("boom"));
  const CheckStatus want[] = {CheckStatus::pass, CheckStatus::fail, CheckStatus::pass, CheckStatus::pass,
                              CheckStatus::warn, CheckStatus::fail, CheckStatus::fail};
  ASSERT_EQ(rep.checks.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(rep.checks[i].status, want[i]) << rep.checks[i].id;
  EXPECT_EQ(rep.checks[6].note, "boom");
  EXPECT_EQ(rep.count(CheckStatus::fail), 3);
  EXPECT_FALSE(rep.passed());
}

TEST(Report, JsonReplacesNonFiniteWithNull) {
  VerificationReport rep;
  rep.error("x", "anchor", "inst", std::runtime_error("e"));
  const auto j = io::report_json(rep);
  EXPECT_TRUE(j["checks"][0]["measured"].is_null());
  EXPECT_EQ(j["checks"][0]["status"], "FAIL");
  EXPECT_EQ(j["summary"]["fail"], 1);
}

TEST(VerifyAll, LightPlanPassesEverything) {
  const auto rep = verify_all(light_plan());
  for (const auto& c : rep.checks) {
    EXPECT_NE(c.status, CheckStatus::fail) << c.id << " [" << c.instance << "] " << c.measured << " > " << c.tolerance
                                           << " " << c.note;
  }
  // every family is present
  for (const char* id : {"r_at_zero_bound", "lipschitz_in_M", "identity_r_M_r", "identity_M_r_M", "identity_r_tau_r",
                         "identity_M_tau_M", "identity_tau_r_tau", "identity_tau_M_tau", "equivalence_from_op",
                         "equivalence_from_np", "equivalence_from_tp", "bang_bang_op", "bang_bang_np", "bang_bang_tp",
                         "degenerate_radius", "maximum_condition", "np_terminal_distance"}) {
    EXPECT_TRUE(std::any_of(rep.checks.begin(), rep.checks.end(), [&](const auto& c) { return c.id == id; })) << id;
  }
}

TEST(VerifyAll, DeterministicForFixedSeed) {
  auto p = light_plan();
  p.seed = 7;
  const auto a = io::report_json(verify_all(p)).dump(2);
  const auto b = io::report_json(verify_all(p)).dump(2);
  EXPECT_EQ(a, b);
  p.seed = 8;
  const auto c = io::report_json(verify_all(p)).dump(2);
  EXPECT_NE(a, c);  // the random samples move with the seed
}

TEST(VerifyAll, SolverFailuresBecomeFailedChecks) {
  // far beyond the regime where the masked adjoint stays above the floor
  auto p = light_plan();
  p.M_samples = {0.0, 40.0};
  p.tau_samples = {0.0};
  p.r_fractions = {0.05};
  const auto rep = check_equivalence(p);
  EXPECT_FALSE(rep.passed());
  bool saw_error = false;
  for (const auto& c : rep.checks) saw_error |= (c.status == CheckStatus::fail && !c.note.empty());
  EXPECT_TRUE(saw_error);
}

TEST(VerifyPlan, FollowsConfig) {
  ProblemConfig c;
  c.T = 2.0;
  c.tau = 0.3;
  c.M = 1.5;
  c.seed = 99;
  c.tol_M = 1e-12;
  const auto p = make_verify_plan(c, 1);
  EXPECT_EQ(p.grid.n_steps(), 400);
  EXPECT_EQ(p.seed, 99u);
  EXPECT_EQ(p.tau_ref, 0.3);
  EXPECT_EQ(p.M_ref, 1.5);
  EXPECT_EQ(p.tol_M, 1e-12);
  EXPECT_DOUBLE_EQ(p.tau_samples.back(), 1.1);
}
