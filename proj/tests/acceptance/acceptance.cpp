// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "heatctl/heatctl.hpp"
#include "support/oracle_op.hpp"

using namespace heatctl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// every record with this id prefix passes, and there are at least min_count of them
Outcome from_report(const VerificationReport& rep, std::initializer_list<const char*> ids, std::size_t min_count) {
  Outcome o{true, {}};
  std::string detail;
  for (const char* id : ids) {
    std::size_t n = 0, bad = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& c : rep.checks) {
      if (c.id != id) continue;
      ++n;
      if (c.status == CheckStatus::fail) ++bad;
      if (c.kind == "bound" && c.tolerance > 0) worst = std::max(worst, c.measured / c.tolerance);
    }
    if (n < min_count || bad > 0) o.pass = false;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s %zu/%zu (worst %.2g of budget)", id, n - bad, n, worst);
    if (!detail.empty()) detail += "; ";
    detail += buf;
  }
  o.detail = detail;
  return o;
}

Outcome c1_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> modes(2, 8), steps(10, 50);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> g;
  int ok = 0;
  double worst = 0.0;
  std::string why;
  for (int k = 0; k < 20; ++k) {
    const int N = modes(rng), n = steps(rng);
    const double lo = 0.05 + 0.35 * unit(rng), hi = lo + 0.2 + 0.35 * unit(rng);
    const SpectralDomain d({lo, hi}, N);
    const TimeGrid grid(0.0, 1.0, n);
    Field y0 = Field::zeros(N), z = Field::zeros(N);
    for (int m = 0; m < N; ++m) {
      y0.coeffs()[m] = g(rng) / (m + 1);
      z.coeffs()[m] = g(rng) / (m + 1);
    }
    const double tau = grid.node(static_cast<int>(unit(rng) * 0.5 * n));
    const double M = 0.1 + 1.9 * unit(rng);
    try {
      const auto s = solve_bvp(d, grid, tau, M, y0, z);
      const auto o = heatctl::testing::oracle_op(d, grid, tau, M, y0, z);
      const double err = std::abs(s.reach_distance - std::sqrt(o.value));
      const double tol = 1e-6 * (1.0 + o.value);
      worst = std::max(worst, err / tol);
      if (err <= tol) ++ok;
    } catch (const std::exception& e) {
      why = e.what();
    }
  }
  Outcome out{ok == 20, fmt("%.0f/20 instances, worst error %.2g of tolerance", ok, worst)};
  if (!why.empty()) out.detail += "; " + why;
  return out;
}

Outcome c7_bisection(const ProblemConfig& cfg) {
  const auto d = make_domain(cfg);
  const auto grid = make_grid(cfg);
  const Field y0 = initial_state(cfg), z = target_state(cfg);
  const double r_T = free_distance(d, grid, y0, z);
  const double T = grid.t_end();
  bool pass = true;
  double worst_halving = 0.0, worst_M = 0.0, worst_tau = 0.0;
  auto halving = [&](const BisectionTrace& tr) {
    const auto& st = tr.steps;
    for (std::size_t n = 0; n + 1 < st.size(); ++n) {
      const double w0 = st[n].b - st[n].a, w1 = st[n + 1].b - st[n + 1].a;
      const double dev = std::abs(w1 - 0.5 * w0) / (std::numeric_limits<double>::epsilon() * std::max(std::abs(st[0].a), std::abs(st[0].b)));
      worst_halving = std::max(worst_halving, dev);
      if (dev > 4.0) pass = false;
    }
  };
  try {
    for (double tau : {0.0, 0.2, 0.4}) {
      for (double frac : {0.6, 0.8}) {
        const double r = frac * r_T;
        const auto res = optimal_norm(d, grid, tau, r, y0, z, {.tol_M = cfg.tol_M, .bvp = {.tol = cfg.tol_bvp}});
        halving(res.trace);
        const double back = reach_distance(d, grid, tau, res.M_star, y0, z, {.tol = cfg.tol_bvp});
        const double budget = (T - tau) * cfg.tol_M + 2 * cfg.tol_bvp;
        worst_M = std::max(worst_M, std::abs(back - r) / budget);
        if (std::abs(back - r) > budget || res.trace.final_tolerance > cfg.tol_M) pass = false;
      }
    }
    for (double M : {1.0, 2.0}) {
      const double r0 = reach_distance(d, grid, 0.0, M, y0, z);
      for (double frac : {0.3, 0.7}) {
        const double r = r0 + frac * (r_T - r0);
        const auto res = optimal_time(d, grid, M, r, y0, z, {.tol_tau = cfg.tol_tau, .bvp = {.tol = cfg.tol_bvp}});
        halving(res.trace);
        const double back = reach_distance(d, grid, res.tau_star, M, y0, z, {.tol = cfg.tol_bvp});
        const double budget = res.local_slope * cfg.tol_tau + 2 * cfg.tol_bvp;
        worst_tau = std::max(worst_tau, std::abs(back - r) / budget);
        if (std::abs(back - r) > budget || res.trace.final_tolerance > cfg.tol_tau) pass = false;
      }
    }
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
  return {pass, fmt("halving off by <= %.1f ulp; |r(tau,M*)-r| %.2g of budget; |r(tau*,M)-r| %.2g of budget",
                    worst_halving, worst_M, worst_tau)};
}

struct LoopStats {
  double excess, dN, sup, N0;
};

LoopStats closed_loop(const ProblemConfig& cfg, int refine) {
  const auto d = make_domain(cfg);
  FeedbackScenario sc;
  sc.r = *cfg.r;
  sc.grid = make_grid(cfg, refine);
  sc.y0 = initial_state(cfg);
  sc.z_d = target_state(cfg);
  sc.t0 = cfg.t0;
  if (cfg.tau > cfg.t0) sc.tau = cfg.tau;
  sc.norm = {.tol_M = cfg.tol_M, .bvp = {.tol = cfg.tol_bvp}};
  const auto run = simulate_closed_loop(d, sc);
  LoopStats s{0.0, 0.0, 0.0, run.N0};
  s.excess = std::max(0.0, (run.states.terminal() - sc.z_d).norm() - sc.r);
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (double N : run.N_values) {
    if (std::isnan(N)) continue;
    if (!std::isnan(prev)) s.dN = std::max(s.dN, std::abs(N - prev));
    prev = N;
  }
  for (std::size_t i = 0; i < run.states.states.size(); ++i) {
    s.sup = std::max(s.sup, (run.states.states[i] - run.open_loop.states[i]).norm());
  }
  return s;
}

Outcome c8_feedback(const ProblemConfig& cfg) {
  try {
    const auto a = closed_loop(cfg, 0), b = closed_loop(cfg, 1);
    const bool shrink = a.excess >= 1.5 * b.excess && (a.excess > 0.0 || b.excess == 0.0);
    const bool steps = a.dN <= 1e-3 * a.N0 && b.dN <= 1e-3 * b.N0;
    const bool sup = b.sup < a.sup;
    std::string detail = fmt("eps %.3g -> %.3g", a.excess, b.excess) +
                         fmt(" (x%.2f); max step |dN|/N0 %.2g", b.excess > 0 ? a.excess / b.excess : INFINITY,
                             std::max(a.dN / a.N0, b.dN / b.N0)) +
                         fmt("; sup distance %.3g -> %.3g", a.sup, b.sup);
    return {shrink && steps && sup, detail};
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HEATCTL_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome c10_determinism(const VerifyPlan& plan, const VerificationReport& first) {
  const auto again = io::report_json(verify_all(plan)).dump(2);
  const bool in_process = again == io::report_json(first).dump(2);
  const fs::path dir = fs::temp_directory_path() / ("heatctl_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  const std::string base = std::string("verify --config ") + HEATCTL_REFERENCE_CONFIG + " --seed 5 --out ";
  const int ra = run_cli(base + (dir / "a").string());
  const int rb = run_cli(base + (dir / "b").string());
  const std::string ja = slurp(dir / "a" / "report.json"), jb = slurp(dir / "b" / "report.json");
  const bool cli = (ra == 0 || ra == 4) && ra == rb && !ja.empty() && ja == jb;
  fs::remove_all(dir);
  return {in_process && cli, std::string("in-process ") + (in_process ? "identical" : "DIFFERENT") + ", CLI report.json " +
                                 (cli ? "byte-identical" : "DIFFERENT") + " (" + std::to_string(ja.size()) + " bytes)"};
}

}  // namespace

int main() {
  const auto cfg = load_config(HEATCTL_REFERENCE_CONFIG);
  const auto plan = make_verify_plan(cfg);
  const auto rep = verify_all(plan);

  int failed = 0;
  auto line = [&](int k, const char* title, const Outcome& o) {
    std::printf("%s criterion %d  %-28s %s\n", o.pass ? "PASS" : "FAIL", k, title, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  };

  line(1, "oracle equivalence", c1_oracle());
  line(2, "r(tau,0) = r_T", from_report(rep, {"r_at_zero_bound"}, 5));
  line(3, "Lipschitz in M", from_report(rep, {"lipschitz_in_M"}, 10));
  line(4, "inverse identities",
       from_report(rep, {"identity_r_M_r", "identity_M_r_M", "identity_r_tau_r", "identity_M_tau_M", "identity_tau_r_tau",
                         "identity_tau_M_tau"},
                   5));
  line(5, "bang-bang", from_report(rep, {"bang_bang_op", "bang_bang_np", "bang_bang_tp"}, 5));
  line(6, "equivalence cycles", from_report(rep, {"equivalence_from_op", "equivalence_from_np", "equivalence_from_tp"}, 5));
  line(7, "bisection convergence", c7_bisection(cfg));
  line(8, "feedback", c8_feedback(cfg));
  line(9, "maximum condition", from_report(rep, {"maximum_condition"}, 1));
  line(10, "determinism", c10_determinism(plan, rep));

  std::printf("%d of 10 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
