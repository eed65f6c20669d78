#include "shellflow/driver.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numbers>

#include "shellflow/errors.hpp"

#ifndef SHELLFLOW_VERSION
#define SHELLFLOW_VERSION "0.0.0"
#endif

namespace shellflow {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Independent deterministic streams per (seed, step, purpose).
std::mt19937_64 stream(std::uint64_t seed, long step, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

constexpr std::uint64_t kGuessStream = 1, kCoercivityStream = 2, kHeightStream = 3;

Field scaled_diff(const Field& a, const Field& b, double s) {
  Field out(a.size());
  for (size_t k = 0; k < a.size(); ++k) out[k] = (a[k] - b[k]) * s;
  return out;
}

Vec3Field scaled_diff(const Vec3Field& a, const Vec3Field& b, double s) {
  return {scaled_diff(a[0], b[0], s), scaled_diff(a[1], b[1], s), scaled_diff(a[2], b[2], s)};
}

double max_abs(const Field& f) {
  double m = 0.0;
  for (double x : f) m = std::max(m, std::abs(x));
  return m;
}

Field flatten(const Vec3Field& v, int c) { return v[static_cast<size_t>(c)]; }

void expect_size(const std::vector<double>& v, size_t n, const std::string& name) {
  if (v.size() != n) throw Error(ErrorKind::Io, "checkpoint entry '" + name + "' has the wrong size");
}

}  // namespace

const char* code_version() { return SHELLFLOW_VERSION; }

Field initial_height(const SimConfig& c, const Grid2& g) {
  const double A = c.height_amplitude;
  const int m = c.height_mode;
  if (c.height == "zero") return Field(g.size(), 0.0);
  if (c.height == "bump")
    return g.sample([&](double x, double y) {
      return A * std::cos(kTwoPi * m * x / g.L1) * std::cos(kTwoPi * m * y / g.L2);
    });
  if (c.height == "random") {
    auto rng = stream(c.seed, 0, kHeightStream);
    Field f = random_height(g, m, rng);
    for (double& x : f) x *= A;
    return f;
  }
  throw Error(ErrorKind::Config, "unknown height preset '" + c.height + "'");
}

Forcing make_forcing(const SimConfig& c) {
  const double A = c.forcing_amplitude;
  const double L2 = c.grid.L2;
  if (c.forcing == "none") return {};
  if (c.forcing == "gravity") return {[A](const Vec3&, double) { return Vec3(0.0, 0.0, -A); }};
  if (c.forcing == "shear")
    return {[A, L2](const Vec3& x, double) { return Vec3(A * std::sin(kTwoPi * x[1] / L2), 0.0, 0.0); }};
  throw Error(ErrorKind::Config, "unknown forcing preset '" + c.forcing + "'");
}

std::shared_ptr<const RunSetup> make_setup(const SimConfig& c) {
  validate(c);
  auto r = std::make_shared<RunSetup>();
  r->config = c;
  r->params = c.fluid_params();
  r->surface = flat_surface(c.grid.layer(), c.fluid.shell.thickness);
  r->u0 = velocity_preset(c.velocity, c.velocity_amplitude, c.grid);
  r->h0 = initial_height(c, c.grid.layer());
  check_graph(r->surface, r->h0);
  r->forcing = make_forcing(c);
  const Field hm = surface_mollify(r->surface, r->h0, surface_spec(r->params.eps, r->params.mollifier_order));
  r->compat = compatibility_initial(r->u0, r->forcing, r->surface, hm, c.grid, r->params);
  return r;
}

Vec3Field random_velocity(const Grid3& g, int maxmode, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  Vec3Field v;
  double mx = 0.0;
  for (int comp = 0; comp < 3; ++comp) {
    Field f(g.size(), 0.0);
    for (int m1 = -maxmode; m1 <= maxmode; ++m1)
      for (int m2 = -maxmode; m2 <= maxmode; ++m2)
        for (int pz = 1; pz <= 2; ++pz) {
          const double w = 1.0 / (1.0 + m1 * m1 + m2 * m2 + pz * pz);
          const double a = w * N(rng), b = w * N(rng);
          for (int k = 0; k <= g.nz; ++k) {
            const double prof = std::sin(0.5 * std::numbers::pi * pz * k / g.nz);
            for (int i = 0; i < g.n1; ++i)
              for (int j = 0; j < g.n2; ++j) {
                const double ph = kTwoPi * (m1 * i / static_cast<double>(g.n1) + m2 * j / static_cast<double>(g.n2));
                f[g.idx(i, j, k)] += prof * (a * std::cos(ph) + b * std::sin(ph));
              }
          }
        }
    mx = std::max(mx, max_abs(f));
    v[static_cast<size_t>(comp)] = std::move(f);
  }
  for (Field& f : v)
    for (double& x : f) x /= mx;
  return v;
}

Field random_height(const Grid2& g, int maxmode, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  Field f(g.size(), 0.0);
  for (int m1 = -maxmode; m1 <= maxmode; ++m1)
    for (int m2 = 0; m2 <= maxmode; ++m2) {
      if (m1 == 0 && m2 == 0) continue;
      const double w = 1.0 / (1.0 + m1 * m1 + m2 * m2);
      const double a = w * N(rng), b = w * N(rng);
      for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
          const double ph = kTwoPi * (m1 * g.y1(i) / g.L1 + m2 * g.y2(j) / g.L2);
          f[g.idx(i, j)] += a * std::cos(ph) + b * std::sin(ph);
        }
    }
  const double mx = max_abs(f);
  for (double& x : f) x /= mx;
  return f;
}

double y_metric(const Grid3& g, const Vec3Field& v1, const Field& h1, const Vec3Field& v2,
                const Field& h2) {
  const double dv = volume_sobolev_norm(g, scaled_diff(v1, v2, 1.0), 1);
  const double dh = sobolev_norm(g.layer(), scaled_diff(h1, h2, 1.0), 4.0);
  return std::sqrt(dv * dv + dh * dh);
}

double PicardLog::max_ratio() const {
  double r = 0.0;
  for (size_t k = 1; k < diffs.size(); ++k)
    if (diffs[k - 1] > 0.0) r = std::max(r, diffs[k] / diffs[k - 1]);
  return r;
}

StepOutcome picard_step(const RunSetup& setup, const FluidState& st, Vec3Field v_guess, Field h_guess) {
  const SimConfig& c = setup.config;
  StepOutcome out;
  int growth = 0;
  for (int sweep = 1; sweep <= c.picard_max_sweeps; ++sweep) {
    const FrozenCoefficients fz = freeze(st, v_guess, h_guess, setup.surface, setup.params);
    StepReport rep;
    FluidState next = linearized_step(st, fz, setup.compat.q0, setup.forcing, setup.surface, setup.params, &rep);
    const double d = y_metric(c.grid, next.v, next.h, v_guess, h_guess);
    if (!out.log.diffs.empty() && d > out.log.diffs.back())
      ++growth;
    else
      growth = 0;
    out.log.diffs.push_back(d);
    if (d < c.picard_tol) {
      out.state = std::move(next);
      out.report = rep;
      return out;
    }
    if (growth >= 3)
      throw Error(ErrorKind::PicardDivergence,
                  "Picard iterates grew for three consecutive sweeps at step " + std::to_string(st.step + 1) +
                      " (last change " + std::to_string(d) + ")");
    v_guess = std::move(next.v);
    h_guess = std::move(next.h);
  }
  throw Error(ErrorKind::PicardNoContraction,
              "Picard did not reach tolerance in " + std::to_string(c.picard_max_sweeps) + " sweeps at step " +
                  std::to_string(st.step + 1) + " (last change " + std::to_string(out.log.diffs.back()) + ")");
}

// ---------------------------------------------------------------------------

Simulation::Simulation(std::shared_ptr<const RunSetup> setup, double guess_perturbation)
    : setup_(std::move(setup)), perturb_(guess_perturbation) {
  const RunSetup& s = *setup_;
  state_ = initial_state(s.config.grid, s.surface, s.u0, s.h0);
  energy_.push_back(energy_state(state_, s.surface, s.params));
}

const std::vector<std::string>& Simulation::header() {
  static const std::vector<std::string> h = {
      "t", "step", "sweeps", "picard_diff", "picard_ratio", "krylov_iterations", "krylov_residual",
      "kinetic", "elastic", "bending", "membrane", "viscous", "kappa_dissipation", "penalty",
      "forcing_work", "pressure_work", "energy_residual", "divergence_l2", "det_error",
      "traction_residual", "theta_q2", "v_L2", "v_H1", "v_H2", "v_H3", "vt_H1", "h_H2", "h_H4",
      "h_H55", "ht_H2", "ht_H25", "htt_H05", "y_norm2", "nu1", "coercivity_flag", "in_small_ball"};
  return h;
}

std::pair<Vec3Field, Field> Simulation::guess() const {
  const SimConfig& c = setup_->config;
  Vec3Field v = state_.v;
  Field h = state_.h;
  if (c.picard_guess == PicardGuess::Extrapolated && has_prev_) {
    for (int comp = 0; comp < 3; ++comp)
      for (size_t k = 0; k < v[comp].size(); ++k) v[comp][k] = 2.0 * v[comp][k] - v_prev_[comp][k];
    for (size_t k = 0; k < h.size(); ++k) h[k] = 2.0 * h[k] - h_prev_[k];
  }
  if (perturb_ != 0.0) {
    auto rng = stream(c.seed, state_.step, kGuessStream);
    const Vec3Field dv = random_velocity(c.grid, 3, rng);
    const Field dh = random_height(c.grid.layer(), 3, rng);
    for (int comp = 0; comp < 3; ++comp)
      for (size_t k = 0; k < v[comp].size(); ++k) v[comp][k] += perturb_ * dv[comp][k];
    for (size_t k = 0; k < h.size(); ++k) h[k] += perturb_ * dh[k];
  }
  return {std::move(v), std::move(h)};
}

StepOutcome Simulation::solve_step() const {
  auto [v, h] = guess();
  return picard_step(*setup_, state_, std::move(v), std::move(h));
}

namespace {

struct Coercivity {
  double nu1 = 0.0;
  bool flag = false, in_ball = false;
};

Coercivity check_coercivity(const RunSetup& s, const Field& h, long step) {
  const SimConfig& c = s.config;
  Coercivity out;
  out.in_ball = sobolev_norm(s.surface.grid, h, 2.0) <= c.fluid.shell.smallness * c.fluid.shell.thickness;
  if (c.coercivity_samples == 0) return out;
  const Field hbar = surface_mollify(s.surface, h, surface_spec(s.params.eps, s.params.mollifier_order));
  const Diff D(s.surface.grid, s.params.backend);
  auto rng = stream(c.seed, step, kCoercivityStream);
  const CoercivityReport r = coercivity(s.surface, hbar, D, c.coercivity_samples, c.coercivity_threshold, rng);
  out.nu1 = r.nu1;
  out.flag = r.violated && out.in_ball;
  return out;
}

double det_error(const FluidState& st) {
  const CofactorField a = cofactor(st.eta);
  double m = 0.0;
  for (double d : a.det) m = std::max(m, std::abs(d - 1.0));
  return m;
}

double theta_q2(const FluidState& st, const FluidParams& p) {
  const Grid3& g = st.eta.grid;
  const double vol = g.h1() * g.h2() * g.hz();
  double s = 0.0;
  for (double q : st.q) s += q * q;
  return p.theta * s * vol;
}

}  // namespace

void Simulation::accept(StepOutcome out) {
  const RunSetup& s = *setup_;
  const SimConfig& c = s.config;
  const Grid3& g = c.grid;
  const Grid2 lg = g.layer();
  const double dt = s.params.dt;
  const FluidState& next = out.state;

  NormSample ns;
  ns.t = next.t;
  const auto vn = volume_sobolev_norms(g, next.v);
  for (int k = 0; k < 4; ++k) ns.v_H[k] = vn[k];
  ns.vt_H1 = volume_sobolev_norm(g, scaled_diff(next.v, state_.v, 1.0 / dt), 1);
  ns.h_H2 = sobolev_norm(lg, next.h, 2.0);
  ns.h_H4 = sobolev_norm(lg, next.h, 4.0);
  ns.h_H55 = sobolev_norm(lg, next.h, 5.5);
  Field ht = scaled_diff(next.h, state_.h, 1.0 / dt);
  ns.ht_H2 = sobolev_norm(lg, ht, 2.0);
  ns.ht_H25 = sobolev_norm(lg, ht, 2.5);
  // h_tt by a second difference; undefined at the first step.
  ns.htt_H05 = has_ht_prev_ ? sobolev_norm(lg, scaled_diff(ht, ht_prev_, 1.0 / dt), 0.5) : 0.0;
  acc_.add(ns, dt);

  const EnergyRow e = energy_balance(energy_.back(), next, out.report, s.surface, s.params);
  const Coercivity co = check_coercivity(s, next.h, next.step);
  if (co.flag && !coercivity_flagged_)
    std::cerr << "warning: coercivity constant " << co.nu1 << " below " << c.coercivity_threshold
              << " inside the smallness ball at t = " << next.t << "\n";
  coercivity_flagged_ = coercivity_flagged_ || co.flag;

  const PicardLog& lg_ = out.log;
  std::vector<double> row = {next.t,
                             static_cast<double>(next.step),
                             static_cast<double>(lg_.sweeps()),
                             lg_.diffs.empty() ? 0.0 : lg_.diffs.back(),
                             lg_.max_ratio(),
                             static_cast<double>(out.report.iterations),
                             out.report.residual,
                             e.kinetic,
                             e.elastic,
                             e.bending,
                             e.membrane,
                             e.viscous,
                             e.kappa,
                             e.penalty,
                             e.forcing_work,
                             e.pressure_work,
                             e.residual,
                             out.report.divergence_l2,
                             det_error(next),
                             boundary_traction_residual(next, s.surface, s.params),
                             theta_q2(next, s.params),
                             ns.v_H[0],
                             ns.v_H[1],
                             ns.v_H[2],
                             ns.v_H[3],
                             ns.vt_H1,
                             ns.h_H2,
                             ns.h_H4,
                             ns.h_H55,
                             ns.ht_H2,
                             ns.ht_H25,
                             ns.htt_H05,
                             acc_.y_norm2(),
                             co.nu1,
                             co.flag ? 1.0 : 0.0,
                             co.in_ball ? 1.0 : 0.0};

  v_prev_ = std::move(state_.v);
  h_prev_ = std::move(state_.h);
  ht_prev_ = std::move(ht);
  has_prev_ = has_ht_prev_ = true;
  state_ = std::move(out.state);
  rows_.push_back(std::move(row));
  energy_.push_back(e);
  picard_.push_back(std::move(out.log));

  if (acc_.y_norm2() > c.M_ball)
    throw Error(ErrorKind::BallExceeded, "left C_T(M) at t = " + std::to_string(state_.t) +
                                             " (Y_T norm squared " + std::to_string(acc_.y_norm2()) + ")");
}

FieldContainer Simulation::checkpoint() const {
  const SimConfig& c = setup_->config;
  FieldContainer f;
  f.put_text("config", to_text(c));
  f.put_text("config_hash", config_hash(c));
  f.put_text("version", code_version());
  f.put_scalar("t", state_.t);
  f.put_scalar("step", static_cast<double>(state_.step));
  f.put_scalar("guess_perturbation", perturb_);
  for (int k = 0; k < 3; ++k) {
    f.put("v" + std::to_string(k), flatten(state_.v, k));
    f.put("eta" + std::to_string(k), flatten(state_.eta.disp, k));
  }
  f.put("q", state_.q);
  f.put("h", state_.h);
  f.put("tau0", state_.tau.disp[0]);
  f.put("tau1", state_.tau.disp[1]);
  f.put_scalar("has_prev", has_prev_ ? 1.0 : 0.0);
  f.put_scalar("has_ht_prev", has_ht_prev_ ? 1.0 : 0.0);
  if (has_prev_) {
    for (int k = 0; k < 3; ++k) f.put("v_prev" + std::to_string(k), flatten(v_prev_, k));
    f.put("h_prev", h_prev_);
  }
  if (has_ht_prev_) f.put("ht_prev", ht_prev_);
  const auto raw = acc_.raw();
  f.put("norm_accumulator", std::vector<double>(raw.begin(), raw.end()));
  return f;
}

void Simulation::restore(const FieldContainer& f) {
  const SimConfig& c = setup_->config;
  if (f.text("config_hash") != config_hash(c))
    throw Error(ErrorKind::Config, "checkpoint was written with a different configuration (hash " +
                                       f.text("config_hash") + ", expected " + config_hash(c) + ")");
  const Grid3& g = c.grid;
  const size_t nn = static_cast<size_t>(g.size()), nl = static_cast<size_t>(g.layer_size());
  FluidState st = initial_state(g, setup_->surface, setup_->u0, setup_->h0);
  st.t = f.scalar("t");
  st.step = static_cast<long>(f.scalar("step"));
  for (int k = 0; k < 3; ++k) {
    const std::string vn = "v" + std::to_string(k), en = "eta" + std::to_string(k);
    expect_size(f.get(vn), nn, vn);
    expect_size(f.get(en), nn, en);
    st.v[k] = f.get(vn);
    st.eta.disp[k] = f.get(en);
  }
  expect_size(f.get("q"), static_cast<size_t>(g.cells()), "q");
  st.q = f.get("q");
  expect_size(f.get("h"), nl, "h");
  st.h = f.get("h");
  expect_size(f.get("tau0"), nl, "tau0");
  expect_size(f.get("tau1"), nl, "tau1");
  st.tau.disp[0] = f.get("tau0");
  st.tau.disp[1] = f.get("tau1");
  has_prev_ = f.scalar("has_prev") != 0.0;
  has_ht_prev_ = f.scalar("has_ht_prev") != 0.0;
  if (has_prev_) {
    for (int k = 0; k < 3; ++k) v_prev_[k] = f.get("v_prev" + std::to_string(k));
    h_prev_ = f.get("h_prev");
  }
  if (has_ht_prev_) ht_prev_ = f.get("ht_prev");
  const auto& raw = f.get("norm_accumulator");
  expect_size(raw, 8, "norm_accumulator");
  std::array<double, 8> r{};
  std::copy(raw.begin(), raw.end(), r.begin());
  acc_ = NormAccumulator::from_raw(r);
  state_ = std::move(st);
  rows_.clear();
  picard_.clear();
  energy_.assign(1, energy_state(state_, setup_->surface, setup_->params));
}

std::vector<std::pair<std::string, double>> state_diagnostics(const RunSetup& s, const FluidState& st) {
  const Grid3& g = s.config.grid;
  const Grid2 lg = g.layer();
  const EnergyRow e = energy_state(st, s.surface, s.params);
  const CofactorField a = cofactor(st.eta);
  const Field div = cofactor_divergence(st.v, a);
  const double vol = g.h1() * g.h2() * g.hz();
  double div2 = 0.0;
  for (double d : div) div2 += d * d * vol;
  const auto vn = volume_sobolev_norms(g, st.v);
  const Coercivity co = check_coercivity(s, st.h, st.step);
  return {{"t", st.t},
          {"step", static_cast<double>(st.step)},
          {"kinetic", e.kinetic},
          {"elastic", e.elastic},
          {"bending", e.bending},
          {"membrane", e.membrane},
          {"divergence_l2", std::sqrt(div2)},
          {"det_error", det_error(st)},
          {"traction_residual", boundary_traction_residual(st, s.surface, s.params)},
          {"theta_q2", theta_q2(st, s.params)},
          {"v_L2", vn[0]},
          {"v_H1", vn[1]},
          {"v_H2", vn[2]},
          {"v_H3", vn[3]},
          {"h_H2", sobolev_norm(lg, st.h, 2.0)},
          {"h_H4", sobolev_norm(lg, st.h, 4.0)},
          {"h_H55", sobolev_norm(lg, st.h, 5.5)},
          {"nu1", co.nu1},
          {"coercivity_flag", co.flag ? 1.0 : 0.0},
          {"in_small_ball", co.in_ball ? 1.0 : 0.0}};
}

// ---------------------------------------------------------------------------

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  std::ofstream os(dir / "manifest.txt", std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot write manifest in " + dir.string());
  os << "config_hash = " << m.config_hash << "\n"
     << "code_version = " << m.version << "\n"
     << "start_time = " << m.start_time << "\n"
     << "end_time = " << m.end_time << "\n"
     << "termination = " << m.termination << "\n";
  for (const auto& [k, v] : m.extra) os << k << " = " << v << "\n";
  os << "files =";
  for (const auto& f : m.files) os << " " << f;
  os << "\n";
}

namespace {

std::string checkpoint_name(long step) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "checkpoint_%06ld.sfc", step);
  return buf;
}

// Shared tail of run() and run_window(): persist and fill the result.
RunResult finish(const Simulation& sim, const RunOptions& o, const std::string& start, RunResult res,
                 std::vector<std::string> files, bool final_saved) {
  if (o.out_dir) {
    const auto& dir = *o.out_dir;
    {
      std::ofstream os(dir / "diagnostics.csv", std::ios::trunc);
      if (!os) throw Error(ErrorKind::Io, "cannot write diagnostics in " + dir.string());
      write_csv(os, Simulation::header(), sim.rows());
    }
    files.push_back("diagnostics.csv");
    if (!final_saved) {
      const std::string name = checkpoint_name(sim.step());
      sim.checkpoint().save(dir / name);
      files.push_back(name);
    }
    Manifest m;
    m.config_hash = config_hash(sim.setup().config);
    m.version = code_version();
    m.start_time = start;
    m.end_time = utc_now();
    m.termination = res.reason;
    files.push_back("manifest.txt");
    m.files = files;
    const Compatibility& cp = sim.setup().compat;
    m.extra = {{"steps", std::to_string(sim.step())},
               {"q0_residual", std::to_string(cp.q0_residual)},
               {"cp_residual", std::to_string(cp.cp_residual)},
               {"deftan_residual", std::to_string(cp.deftan_residual)},
               {"coercivity_flagged", sim.coercivity_flagged() ? "yes" : "no"}};
    write_manifest(dir, m);
  }
  res.final_state = sim.state();
  res.rows = sim.rows();
  res.energy = sim.energy();
  res.picard = sim.picard();
  res.files = std::move(files);
  res.coercivity_flagged = sim.coercivity_flagged();
  return res;
}

void record_error(RunResult& res, const Error& e) {
  res.reason = e.kind() == ErrorKind::BallExceeded
                   ? std::string("left C_T(M): ") + e.what()
                   : std::string(error_kind_name(e.kind())) + ": " + e.what();
  res.exit_code = e.exit_code();
}

std::vector<std::string> prepare_outputs(const SimConfig& c, const RunOptions& o) {
  if (!o.out_dir) return {};
  std::filesystem::create_directories(*o.out_dir);
  std::ofstream os(*o.out_dir / "config.txt", std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot write into " + o.out_dir->string());
  os << to_text(c);
  return {"config.txt"};
}

}  // namespace

RunResult run(const SimConfig& c, const RunOptions& o) {
  if (c.picard_mode == PicardMode::Window) return run_window(c, o);
  const auto setup = make_setup(c);
  const std::string start = utc_now();
  Simulation sim(setup, o.guess_perturbation);
  if (o.resume) sim.restore(FieldContainer::load(*o.resume));
  if (o.verbose)
    std::cerr << "compatibility: q0 residual " << setup->compat.q0_residual << ", CP "
              << setup->compat.cp_residual << ", tangential stress " << setup->compat.deftan_residual << "\n";
  std::vector<std::string> files = prepare_outputs(c, o);
  const int every = o.checkpoint_every >= 0 ? o.checkpoint_every : c.checkpoint_every;
  RunResult res;
  bool final_saved = false;
  try {
    while (!sim.done() && (o.stop_after_step < 0 || sim.step() < o.stop_after_step)) {
      sim.advance();
      final_saved = false;
      if (o.out_dir && every > 0 && sim.step() % every == 0) {
        const std::string name = checkpoint_name(sim.step());
        sim.checkpoint().save(*o.out_dir / name);
        files.push_back(name);
        final_saved = true;
      }
      if (o.verbose) {
        const auto& r = sim.rows().back();
        std::cerr << "step " << sim.step() << " t " << sim.state().t << " sweeps " << r[2] << " E "
                  << r[7] + r[8] << "\n";
      }
    }
  } catch (const Error& e) {
    record_error(res, e);
    if (o.verbose) std::cerr << "run stopped: " << res.reason << "\n";
  }
  return finish(sim, o, start, std::move(res), std::move(files), final_saved);
}

RunResult run_window(const SimConfig& c, const RunOptions& o) {
  const auto setup = make_setup(c);
  const std::string start = utc_now();
  Simulation sim(setup, 0.0);
  if (o.resume) sim.restore(FieldContainer::load(*o.resume));
  std::vector<std::string> files = prepare_outputs(c, o);
  long n_steps = c.steps() - sim.step();
  if (o.stop_after_step >= 0) n_steps = std::min(n_steps, o.stop_after_step - sim.step());
  RunResult res;
  try {
    const FluidState start_state = sim.state();
    std::vector<Vec3Field> gv(static_cast<size_t>(std::max(0L, n_steps)), start_state.v);
    std::vector<Field> gh(gv.size(), start_state.h);
    std::vector<StepOutcome> outs;
    PicardLog log;
    int growth = 0;
    bool converged = n_steps <= 0;
    for (int sweep = 1; sweep <= c.picard_max_sweeps && !converged; ++sweep) {
      outs.clear();
      FluidState st = start_state;
      double dmax = 0.0;
      for (long n = 0; n < n_steps; ++n) {
        const FrozenCoefficients fz = freeze(st, gv[n], gh[n], setup->surface, setup->params);
        StepOutcome out;
        out.state = linearized_step(st, fz, setup->compat.q0, setup->forcing, setup->surface, setup->params,
                                    &out.report);
        dmax = std::max(dmax, y_metric(c.grid, out.state.v, out.state.h, gv[n], gh[n]));
        gv[n] = out.state.v;
        gh[n] = out.state.h;
        st = out.state;
        outs.push_back(std::move(out));
      }
      growth = (!log.diffs.empty() && dmax > log.diffs.back()) ? growth + 1 : 0;
      log.diffs.push_back(dmax);
      if (o.verbose) std::cerr << "window sweep " << sweep << " change " << dmax << "\n";
      converged = dmax < c.picard_tol;
      if (!converged && growth >= 3)
        throw Error(ErrorKind::PicardDivergence, "window Picard iterates grew for three consecutive sweeps");
    }
    if (!converged)
      throw Error(ErrorKind::PicardNoContraction,
                  "window Picard did not reach tolerance in " + std::to_string(c.picard_max_sweeps) + " sweeps");
    for (auto& out : outs) {
      out.log = log;
      sim.accept(std::move(out));
    }
  } catch (const Error& e) {
    record_error(res, e);
  }
  return finish(sim, o, start, std::move(res), std::move(files), false);
}

UniquenessReport uniqueness_probe(const SimConfig& c, double scale, long steps) {
  const auto setup = make_setup(c);
  Simulation a(setup, 0.0), b(setup, scale);
  const long n = steps < 0 ? c.steps() : std::min(steps, c.steps());
  UniquenessReport r;
  for (long k = 0; k < n; ++k) {
    a.advance();
    b.advance();
    const double gap = y_metric(c.grid, a.state().v, a.state().h, b.state().v, b.state().h);
    r.t.push_back(a.state().t);
    r.gap.push_back(gap);
    r.max_gap = std::max(r.max_gap, gap);
    r.final_gap = gap;
    r.max_sweeps = std::max({r.max_sweeps, a.picard().back().sweeps(), b.picard().back().sweeps()});
  }
  return r;
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::Shape, "slope fit needs two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw Error(ErrorKind::Domain, "slope fit needs positive data");
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

SweepReport parameter_sweep(const SimConfig& base, const std::string& param, int halvings) {
  if (halvings < 1) throw Error(ErrorKind::Usage, "a sweep needs at least one halving");
  const auto t0 = std::chrono::steady_clock::now();
  const FluidParams bp = base.fluid_params();
  double v0 = 0.0;
  if (param == "theta") v0 = bp.theta;
  else if (param == "kappa") v0 = bp.kappa;
  else if (param == "eps") v0 = bp.eps;
  else if (param == "eps1") v0 = bp.eps1;
  else throw Error(ErrorKind::Usage, "sweep parameter must be theta, kappa, eps or eps1, got '" + param + "'");
  if (!(v0 > 0.0)) throw Error(ErrorKind::Config, "sweep parameter " + param + " must start positive");

  SweepReport rep;
  rep.param = param;
  rep.metric = param == "theta" ? "divergence_l2_spacetime" : "y_gap_to_smallest";
  std::vector<FluidState> finals;
  const size_t div_col = 17, tq_col = 20;
  for (int k = 0; k <= halvings; ++k) {
    SimConfig c = base;
    const double v = v0 * std::ldexp(1.0, -k);
    if (param == "theta") c.fluid.theta = v;
    else if (param == "kappa") c.fluid.kappa = v;
    else if (param == "eps") c.eps_mollify = v;
    else c.eps1_mollify = v;
    Simulation sim(make_setup(c));
    while (!sim.done()) sim.advance();
    SweepPoint pt;
    pt.value = v;
    for (const auto& r : sim.rows()) pt.metric += c.fluid.dt * r[div_col] * r[div_col];
    pt.metric = std::sqrt(pt.metric);
    pt.final_divergence = sim.rows().empty() ? 0.0 : sim.rows().back()[div_col];
    pt.theta_q2 = sim.rows().empty() ? 0.0 : sim.rows().back()[tq_col];
    for (const auto& l : sim.picard()) pt.max_sweeps = std::max(pt.max_sweeps, l.sweeps());
    rep.points.push_back(pt);
    finals.push_back(sim.state());
  }
  std::vector<double> xs, ys;
  if (param == "theta") {
    for (const auto& p : rep.points) {
      xs.push_back(p.value);
      ys.push_back(p.metric);
    }
  } else {
    const FluidState& ref = finals.back();
    for (size_t k = 0; k < rep.points.size(); ++k) {
      rep.points[k].metric = y_metric(base.grid, finals[k].v, finals[k].h, ref.v, ref.h);
      if (k + 1 < rep.points.size()) {
        xs.push_back(rep.points[k].value);
        ys.push_back(rep.points[k].metric);
      }
    }
  }
  rep.slope = xs.size() >= 2 ? fit_loglog_slope(xs, ys) : 0.0;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace shellflow
