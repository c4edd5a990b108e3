// heatctl: command-line front end.
//
//   heatctl solve-op     --config c.cfg --out dir
//   heatctl solve-np     --config c.cfg --out dir
//   heatctl solve-tp     --config c.cfg --out dir
//   heatctl feedback-sim --config c.cfg --out dir [--refine k]
//   heatctl verify       --config c.cfg --out dir [--seed s]
//
// Exit status: 0 ok, 1 configuration, 2 infeasible, 3 solver failure,
// 4 verification report with failed checks.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "heatctl/heatctl.hpp"

namespace fs = std::filesystem;
using namespace heatctl;
using io::json;

namespace {

struct Flags {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int refine = 0;
};

struct Context {
  std::string command;
  Flags flags;
  ProblemConfig cfg;
  SpectralDomain domain{Interval{0.0, 1.0}, 1};
  TimeGrid grid;
  Field y0;
  Field z_d;

  std::string path(const char* name) const { return (fs::path(flags.out) / name).string(); }

  json summary() const {
    json j;
    j["command"] = command;
    j["config"] = io::config_json(cfg);
    j["refine"] = flags.refine;
    j["n_steps_effective"] = grid.n_steps();
    return j;
  }

  double require_r() const {
    if (!cfg.r) throw ConfigError("config: '" + command + "' needs key r");
    return *cfg.r;
  }
};

json bvp_json(const BvpSolution& s) {
  return {{"reach_distance", s.reach_distance}, {"iterations", s.iterations},
          {"fw_iterations", s.fw_iterations},   {"residual", s.residual},
          {"duality_gap", s.duality_gap},       {"min_masked_adjoint", io::number(s.min_masked_adjoint)}};
}

int solve_op(const Context& c) {
  const auto s = solve_bvp(c.domain, c.grid, c.cfg.tau, c.cfg.M, c.y0, c.z_d, {.tol = c.cfg.tol_bvp});
  json j = c.summary();
  j["r_T"] = s.free_distance;
  j["tau"] = c.cfg.tau;
  j["M"] = c.cfg.M;
  j["solution"] = bvp_json(s);
  io::write_control_csv(c.path("control.csv"), s.control);
  io::write_states_csv(c.path("state.csv"), s.phi);
  io::write_states_csv(c.path("adjoint.csv"), s.psi);
  io::write_json(c.path("summary.json"), j);
  std::printf("r(tau,M) = %.17g  (r_T = %.17g)\n", s.reach_distance, s.free_distance);
  return 0;
}

int solve_np(const Context& c) {
  const double r = c.require_r();
  NormSearchOptions opts{.tol_M = c.cfg.tol_M, .bvp = {.tol = c.cfg.tol_bvp}, .M0 = c.cfg.M0};
  const auto res = optimal_norm(c.domain, c.grid, c.cfg.tau, r, c.y0, c.z_d, opts);
  const double T = c.grid.t_end();
  json j = c.summary();
  j["r"] = r;
  j["tau"] = c.cfg.tau;
  j["r_T"] = res.r_T;
  j["M_star"] = res.M_star;
  j["M0"] = res.M0;
  j["K"] = res.K;
  j["bracket_width"] = res.trace.final_tolerance;
  j["bisection_steps"] = res.trace.steps.size();
  j["bvp_solves"] = res.bvp_solves;
  j["value_budget"] = (T - c.cfg.tau) * c.cfg.tol_M + 2 * c.cfg.tol_bvp;
  if (res.solution) {
    j["solution"] = bvp_json(*res.solution);
    io::write_states_csv(c.path("state.csv"), res.solution->phi);
  } else {
    j["note"] = "r >= r_T: the null control already reaches the ball";
  }
  io::write_control_csv(c.path("control.csv"), res.control);
  io::write_trace_csv(c.path("trace.csv"), res.trace);
  io::write_json(c.path("summary.json"), j);
  std::printf("M(r,tau) = %.17g  (r_T = %.17g)\n", res.M_star, res.r_T);
  return 0;
}

int solve_tp(const Context& c) {
  const double r = c.require_r();
  const auto res = optimal_time(c.domain, c.grid, c.cfg.M, r, c.y0, c.z_d,
                                {.tol_tau = c.cfg.tol_tau, .bvp = {.tol = c.cfg.tol_bvp}});
  json j = c.summary();
  j["r"] = r;
  j["M"] = c.cfg.M;
  j["r_T"] = res.r_T;
  j["r_at_zero"] = res.r_at_zero;
  j["tau_star"] = res.tau_star;
  j["tau_snapped"] = res.tau_snapped;
  j["local_slope"] = res.local_slope;
  j["bracket_width"] = res.trace.final_tolerance;
  j["bisection_steps"] = res.trace.steps.size();
  j["bvp_solves"] = res.bvp_solves;
  j["value_budget"] = res.local_slope * c.cfg.tol_tau + 2 * c.cfg.tol_bvp;
  j["solution"] = bvp_json(res.solution);
  io::write_control_csv(c.path("control.csv"), res.control);
  io::write_states_csv(c.path("state.csv"), res.solution.phi);
  io::write_trace_csv(c.path("trace.csv"), res.trace);
  io::write_json(c.path("summary.json"), j);
  std::printf("tau(M,r) = %.17g  (snapped %.17g)\n", res.tau_star, res.tau_snapped);
  return 0;
}

int feedback_sim(const Context& c) {
  FeedbackScenario sc;
  sc.r = c.require_r();
  sc.grid = c.grid;
  sc.y0 = c.y0;
  sc.z_d = c.z_d;
  sc.t0 = c.cfg.t0;
  if (c.cfg.tau > c.cfg.t0) sc.tau = c.cfg.tau;
  sc.norm = {.tol_M = c.cfg.tol_M, .bvp = {.tol = c.cfg.tol_bvp}, .M0 = c.cfg.M0};
  const auto run = simulate_closed_loop(c.domain, sc);

  double dN = 0.0, sup = 0.0;
  for (double N : run.N_values) {
    if (!std::isnan(N)) dN = std::max(dN, std::abs(N - run.N0));
  }
  for (std::size_t i = 0; i < run.states.states.size(); ++i) {
    sup = std::max(sup, (run.states.states[i] - run.open_loop.states[i]).norm());
  }
  const double miss = (run.states.terminal() - c.z_d).norm();

  json j = c.summary();
  j["r"] = sc.r;
  j["t0"] = sc.t0;
  j["tau"] = sc.tau.value_or(sc.t0);
  j["N0"] = run.N0;
  j["max_N_variation"] = dN;
  j["terminal_miss"] = miss;
  j["miss_minus_r"] = miss - sc.r;
  j["open_loop_sup_distance"] = sup;
  j["cold_restarts"] = run.cold_restarts;
  j["bvp_solves"] = run.bvp_solves;

  io::write_states_csv(c.path("closed_loop.csv"), run.states);
  io::write_states_csv(c.path("open_loop.csv"), run.open_loop);
  io::write_control_csv(c.path("feedback_control.csv"), run.applied);
  {
    auto out = io::open_out(c.path("n_values.csv"));
    out << "t,N,masked_adjoint\n";
    for (std::size_t i = 0; i < run.N_values.size(); ++i) {
      out << io::fmt(run.applied.grid.node(static_cast<int>(i))) << ',' << io::fmt(run.N_values[i]) << ','
          << io::fmt(run.masked_adjoint[i]) << '\n';
    }
  }
  io::write_json(c.path("summary.json"), j);
  std::printf("N0 = %.17g  miss - r = %.3g  max |N - N0| = %.3g\n", run.N0, miss - sc.r, dN);
  return 0;
}

int verify(const Context& c) {
  const auto plan = make_verify_plan(c.cfg, c.flags.refine);
  const auto rep = verify_all(plan);
  json report;
  report["config"] = io::config_json(c.cfg);
  report["refine"] = c.flags.refine;
  const json body = io::report_json(rep);
  report["summary"] = body["summary"];
  report["checks"] = body["checks"];
  io::write_json(c.path("report.json"), report);

  json j = c.summary();
  j["report"] = "report.json";
  j["checks"] = body["summary"];
  io::write_json(c.path("summary.json"), j);

  for (const auto& ch : rep.checks) {
    if (ch.status != CheckStatus::pass) {
      std::printf("%s %s [%s] measured %.3g tolerance %.3g %s\n", to_string(ch.status), ch.id.c_str(),
                  ch.instance.c_str(), ch.measured, ch.tolerance, ch.note.c_str());
    }
  }
  std::printf("%d checks: %d pass, %d warn, %d fail\n", static_cast<int>(rep.checks.size()),
              rep.count(CheckStatus::pass), rep.count(CheckStatus::warn), rep.count(CheckStatus::fail));
  return rep.passed() ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal target, norm and time control of the 1-D heat equation"};
  app.require_subcommand(1);
  Flags flags;
  auto add = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--seed", flags.seed, "overrides the config seed");
    sub->add_option("--refine", flags.refine, "halve dt this many times")->check(CLI::Range(0, 16));
    return sub;
  };
  auto* op = add("solve-op", "optimal target: r(tau, M)");
  auto* np = add("solve-np", "optimal norm: M(r, tau)");
  auto* tp = add("solve-tp", "optimal time: tau(M, r)");
  auto* fb = add("feedback-sim", "closed loop under the optimal-norm feedback");
  auto* vf = add("verify", "run the verification suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  Context c;
  c.flags = flags;
  try {
    c.cfg = load_config(flags.config);
    if (flags.seed) c.cfg.seed = *flags.seed;
    c.domain = make_domain(c.cfg);
    c.grid = make_grid(c.cfg, flags.refine);
    c.y0 = initial_state(c.cfg);
    c.z_d = target_state(c.cfg);
    fs::create_directories(flags.out);
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (op->parsed()) return c.command = "solve-op", solve_op(c);
    if (np->parsed()) return c.command = "solve-np", solve_np(c);
    if (tp->parsed()) return c.command = "solve-tp", solve_tp(c);
    if (fb->parsed()) return c.command = "feedback-sim", feedback_sim(c);
    if (vf->parsed()) return c.command = "verify", verify(c);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const ArgumentError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
