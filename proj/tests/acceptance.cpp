// Acceptance harness: one PASS/FAIL line per criterion, exit status 1 if
// any criterion fails. Arguments select a subset by number (e.g. "1 4 9").

#include <chrono>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "shellflow/driver.hpp"
#include "shellflow/errors.hpp"
#include "shellflow/verify.hpp"

using namespace shellflow;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

bool same_state(const FluidState& a, const FluidState& b) {
  for (int k = 0; k < 3; ++k)
    if (a.v[k] != b.v[k] || a.eta.disp[k] != b.eta.disp[k]) return false;
  return a.q == b.q && a.h == b.h && a.tau.disp[0] == b.tau.disp[0] && a.tau.disp[1] == b.tau.disp[1] &&
         a.t == b.t && a.step == b.step;
}

Outcome c1() {
  const auto r = identity_check(50, 64);
  const double worst = std::max({r.gG, r.detg, r.theta});
  return {worst <= limits::identity && r.seconds <= limits::identity_seconds,
          "50 pairs at 64^2: metric " + fmt(r.gG) + ", det " + fmt(r.detg) + ", Theta " + fmt(r.theta) +
              " (<= 1e-8), " + fmt(r.seconds) + " s (<= 60 s)"};
}

Outcome c2() {
  const auto r = reparam_check({32, 64, 128});
  double worst = 0.0;
  for (double t : r.seconds) worst = std::max(worst, t);
  std::string res;
  for (size_t k = 0; k < r.n.size(); ++k) res += (k ? " -> " : "") + fmt(r.residual[k]);
  return {r.min_order >= limits::reparam_order && worst <= limits::reparam_seconds,
          "residual " + res + ", order " + fmt(r.min_order) + " (>= 1.8), slowest grid " + fmt(worst) +
              " s (<= 30 s)"};
}

Outcome c3(const SimConfig& desk) {
  const auto r = variational_check(desk.fluid.shell, 10, 10);
  return {r.max_rel_err <= limits::variational,
          std::to_string(r.cases) + " cases, max rel err " + fmt(r.max_rel_err) + " (<= 1e-4); convention: " +
              r.convention};
}

Outcome c4(const SimConfig& desk) {
  const auto r = coercivity_check(desk, 100);
  return {r.nu_flat >= limits::coercivity_flat && r.nu_ball >= limits::coercivity_ball,
          "nu1 flat " + fmt(r.nu_flat) + " (>= 0.9), in ball " + fmt(r.nu_ball) + " (>= 0.5) at H2 norm " +
              fmt(r.h2_max) + " of radius " + fmt(r.ball_radius)};
}

Outcome c5(const SimConfig& desk) {
  SimConfig c = desk;
  c.T = 10 * c.fluid.dt;
  const auto r = parameter_sweep(c, "theta", 5);
  std::string pts;
  for (const auto& p : r.points) pts += (pts.empty() ? "" : ", ") + fmt(p.metric);
  const bool slope_ok = r.slope >= 0.35 && r.slope <= 0.65;
  return {slope_ok && r.seconds <= 600.0,
          "space-time ||a:grad v|| over theta = 1e-3 / 2^k: " + pts + "; slope " + fmt(r.slope) +
              " (in [0.35, 0.65]), " + fmt(r.seconds) + " s (<= 600 s)"};
}

Outcome c6(const SimConfig& desk) {
  const auto r = mollifier_check(desk);
  return {r.self_adjoint <= limits::self_adjoint && r.symbol <= limits::symbol && r.sbp <= limits::sbp,
          "self-adjoint " + fmt(r.self_adjoint) + " (<= 1e-12), symbol " + fmt(r.symbol) +
              " (<= 1e-13), summation by parts " + fmt(r.sbp) + " (<= 1e-11)"};
}

Outcome c7(const SimConfig& desk) {
  const double T = 0.02;
  std::vector<double> dts, res;
  bool monotone = true;
  std::string pts;
  for (double dt : {2e-3, 1e-3, 5e-4}) {
    SimConfig c = desk;
    c.forcing = "none";
    c.fluid.dt = dt;
    c.T = T;
    const RunResult r = run(c);
    if (r.exit_code != 0) return {false, "run at dt " + fmt(dt) + " stopped: " + r.reason};
    const double E0 = r.energy.front().total();
    monotone = monotone && energy_nonincreasing(r.energy, 5, 1e-12 * E0);
    dts.push_back(dt);
    res.push_back(r.energy.back().residual);
    pts += (pts.empty() ? "" : ", ") + fmt(r.energy.back().residual);
  }
  const double slope = fit_loglog_slope(dts, res);
  return {std::abs(slope - 1.0) <= 0.2 && monotone,
          "residual at t = " + fmt(T) + " for dt 2e-3, 1e-3, 5e-4: " + pts + "; slope " + fmt(slope) +
              " (1.0 +- 0.2); energy non-increasing after 5 steps: " + (monotone ? "yes" : "no")};
}

// The desk runs shared by criteria 8 and 10.
struct DeskRuns {
  RunResult baseline, perturbed, resumed;
  double seconds = 0.0;
};

const DeskRuns& desk_runs(const SimConfig& desk) {
  static const DeskRuns runs = [&] {
    const auto t0 = Clock::now();
    const fs::path dir = fs::temp_directory_path() / "shellflow_acceptance";
    fs::remove_all(dir);
    DeskRuns d;
    const long half = desk.steps() / 2;
    RunOptions o;
    o.out_dir = dir;
    o.checkpoint_every = static_cast<int>(half);
    d.baseline = run(desk, o);
    RunOptions p;
    p.guess_perturbation = 1e-3;
    d.perturbed = run(desk, p);
    char name[48];
    std::snprintf(name, sizeof name, "checkpoint_%06ld.sfc", half);
    RunOptions r;
    r.resume = dir / name;
    d.resumed = run(desk, r);
    d.seconds = since(t0);
    return d;
  }();
  return runs;
}

Outcome c8(const SimConfig& desk) {
  const DeskRuns& d = desk_runs(desk);
  if (d.baseline.exit_code != 0 || d.perturbed.exit_code != 0)
    return {false, "desk run stopped: " + d.baseline.reason + " / " + d.perturbed.reason};
  int sweeps = 0;
  double ratio = 0.0;
  for (const auto* r : {&d.baseline, &d.perturbed})
    for (const auto& l : r->picard) {
      sweeps = std::max(sweeps, l.sweeps());
      ratio = std::max(ratio, l.max_ratio());
    }
  const FluidState& a = d.baseline.final_state;
  const FluidState& b = d.perturbed.final_state;
  const double gap = y_metric(desk.grid, a.v, a.h, b.v, b.h);
  return {sweeps <= desk.picard_max_sweeps && gap <= 10 * desk.picard_tol,
          std::to_string(d.baseline.picard.size()) + " steps, max sweeps " + std::to_string(sweeps) +
              " (<= 8), max sweep ratio " + fmt(ratio) + "; final gap with 1e-3 guess perturbation " + fmt(gap) +
              " (<= " + fmt(10 * desk.picard_tol) + ")"};
}

Outcome c9(const SimConfig& desk) {
  const auto r = compatibility_check(desk);
  const double cp_limit = limits::cp_rounding * DBL_EPSILON * r.compliant_scale;
  return {r.q0_residual <= limits::q0_residual && r.compliant_deftan == 0.0 && r.compliant_cp <= cp_limit,
          "q0 residual " + fmt(r.q0_residual) + " (<= 1e-9); desk CP " + fmt(r.cp_residual) +
              " and tangential Def " + fmt(r.deftan_residual) + " (reported); compliant field CP " +
              fmt(r.compliant_cp) + " (rounding bound " + fmt(cp_limit) + "), tangential Def " +
              fmt(r.compliant_deftan) + " (== 0)"};
}

Outcome c10(const SimConfig& desk) {
  const DeskRuns& d = desk_runs(desk);
  const auto& full = d.baseline.rows;
  const auto& tail = d.resumed.rows;
  bool rows_equal = tail.size() <= full.size();
  for (size_t k = 0; rows_equal && k < tail.size(); ++k) rows_equal = tail[k] == full[full.size() - tail.size() + k];
  const bool state_equal = same_state(d.resumed.final_state, d.baseline.final_state);
  return {d.resumed.exit_code == 0 && state_equal && rows_equal && !tail.empty(),
          "resume from step " + std::to_string(full.size() - tail.size()) + ": final state bit-identical " +
              (state_equal ? "yes" : "no") + ", diagnostics rows identical " + (rows_equal ? "yes" : "no") +
              " (desk runs " + fmt(d.seconds) + " s)"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int k = 1; k < argc; ++k) only.insert(std::atoi(argv[k]));
  const SimConfig desk = desk_config();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"geometric identity suite", [] { return c1(); }},
      {"reparameterization symmetry", [] { return c2(); }},
      {"variational consistency", [&] { return c3(desk); }},
      {"coercivity", [&] { return c4(desk); }},
      {"penalization rate", [&] { return c5(desk); }},
      {"mollifier algebra", [&] { return c6(desk); }},
      {"energy ledger", [&] { return c7(desk); }},
      {"fixed point and uniqueness", [&] { return c8(desk); }},
      {"compatibility solver", [&] { return c9(desk); }},
      {"determinism and restart", [&] { return c10(desk); }},
  };
  int failed = 0;
  for (size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const Error& e) {
      o = {false, std::string("aborted (") + error_kind_name(e.kind()) + "): " + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << "C" << id << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[k].first << ": " << o.detail
              << " [" << fmt(since(t0)) << " s]" << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
