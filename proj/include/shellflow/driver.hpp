#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "shellflow/checkpoint.hpp"
#include "shellflow/config.hpp"
#include "shellflow/diagnostics.hpp"

namespace shellflow {

const char* code_version();

// Immutable data shared by every step of one run.
struct RunSetup {
  SimConfig config;
  FluidParams params;
  ReferenceSurface surface;
  VelocityField u0;
  Field h0;
  Forcing forcing;
  Compatibility compat;  // from the mollified h0; compat.q0 is the q0_tilde of every step
};
// Validates the config, builds the initial data and solves the
// compatibility problem.
std::shared_ptr<const RunSetup> make_setup(const SimConfig& c);

Field initial_height(const SimConfig& c, const Grid2& g);
Forcing make_forcing(const SimConfig& c);

// Seeded smooth fields with unit max norm; the velocity vanishes on the wall.
Vec3Field random_velocity(const Grid3& g, int maxmode, std::mt19937_64& rng);
Field random_height(const Grid2& g, int maxmode, std::mt19937_64& rng);

// Uniqueness metric between two (v, h) pairs of the same step:
// sqrt(||v1 - v2||^2_{H1} + ||h1 - h2||^2_{H4}).
double y_metric(const Grid3& g, const Vec3Field& v1, const Field& h1, const Vec3Field& v2,
                const Field& h2);

struct PicardLog {
  std::vector<double> diffs;  // Y-metric between consecutive iterates, one per sweep
  int sweeps() const { return static_cast<int>(diffs.size()); }
  // max diffs[k] / diffs[k-1] over k >= 1; 0 with fewer than two sweeps.
  double max_ratio() const;
};

struct StepOutcome {
  FluidState state;
  StepReport report;
  PicardLog log;
};

// Repeats linearized_step with coefficients frozen at the previous sweep
// until the Y-metric change drops below picard_tol. Three consecutive
// increases raise PicardDivergence; running out of sweeps raises
// PicardNoContraction.
StepOutcome picard_step(const RunSetup& setup, const FluidState& st, Vec3Field v_guess, Field h_guess);

// One trajectory with the history needed for diagnostics and restart.
class Simulation {
 public:
  explicit Simulation(std::shared_ptr<const RunSetup> setup, double guess_perturbation = 0.0);

  const RunSetup& setup() const { return *setup_; }
  const FluidState& state() const { return state_; }
  long step() const { return state_.step; }
  bool done() const { return state_.step >= setup_->config.steps(); }

  // Initial Picard guess for the next step, offset by the seeded
  // perturbation when one was requested.
  std::pair<Vec3Field, Field> guess() const;
  StepOutcome solve_step() const;
  // Records diagnostics for an accepted step and makes it current. Raises
  // BallExceeded once the running Y_T norm passes M (the step is kept).
  void accept(StepOutcome out);
  void advance() { accept(solve_step()); }

  // State plus history; continuing from restore() is bit-identical.
  FieldContainer checkpoint() const;
  void restore(const FieldContainer& c);

  static const std::vector<std::string>& header();
  const std::vector<std::vector<double>>& rows() const { return rows_; }
  const std::vector<EnergyRow>& energy() const { return energy_; }
  const std::vector<PicardLog>& picard() const { return picard_; }
  bool coercivity_flagged() const { return coercivity_flagged_; }

 private:
  std::shared_ptr<const RunSetup> setup_;
  double perturb_;
  FluidState state_;
  Vec3Field v_prev_;
  Field h_prev_, ht_prev_;
  bool has_prev_ = false, has_ht_prev_ = false;
  NormAccumulator acc_;
  std::vector<std::vector<double>> rows_;
  std::vector<EnergyRow> energy_;
  std::vector<PicardLog> picard_;
  bool coercivity_flagged_ = false;
};

// Diagnostics of one state without history: energies, norms, residuals.
std::vector<std::pair<std::string, double>> state_diagnostics(const RunSetup& setup, const FluidState& st);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // manifest, config, diagnostics, checkpoints
  int checkpoint_every = -1;                     // < 0: take it from the config
  double guess_perturbation = 0.0;
  long stop_after_step = -1;                     // < 0: run to T
  std::optional<std::filesystem::path> resume;   // checkpoint to continue from
  bool verbose = false;
};

struct RunResult {
  std::string reason = "completed";  // or "left C_T(M)" or the error text
  int exit_code = 0;
  FluidState final_state;
  std::vector<std::vector<double>> rows;
  std::vector<EnergyRow> energy;
  std::vector<PicardLog> picard;
  std::vector<std::string> files;
  bool coercivity_flagged = false;
};

// Config errors are thrown before anything is written. Numerical aborts
// end the run: the manifest, diagnostics and a final checkpoint are still
// written and the result carries the reason and exit code.
RunResult run(const SimConfig& c, const RunOptions& o = {});

// Whole-window fixed point: each sweep recomputes the full trajectory with
// coefficients frozen from the previous sweep's trajectory.
RunResult run_window(const SimConfig& c, const RunOptions& o = {});

struct UniquenessReport {
  std::vector<double> t, gap;  // Y-metric gap per step
  double max_gap = 0.0, final_gap = 0.0;
  int max_sweeps = 0;
};
// Baseline and perturbed-guess runs in lockstep; steps < 0 runs to T.
UniquenessReport uniqueness_probe(const SimConfig& c, double scale, long steps = -1);

struct SweepPoint {
  double value = 0.0;
  // theta: space-time L2 norm of a:grad v over (0, T], the quantity the
  // penalty dissipation bounds by sqrt(theta E0); others: gap to the finest run.
  double metric = 0.0;
  double final_divergence = 0.0;  // spatial L2 norm of a:grad v at T
  double theta_q2 = 0.0;       // theta ||q||^2 at the final step
  int max_sweeps = 0;
};
struct SweepReport {
  std::string param, metric;
  std::vector<SweepPoint> points;
  double slope = 0.0;          // least-squares slope of log metric against log value
  double seconds = 0.0;
};
// param in {theta, kappa, eps, eps1}; value_k = base * 2^-k for k = 0..halvings.
SweepReport parameter_sweep(const SimConfig& base, const std::string& param, int halvings);

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct Manifest {
  std::string config_hash, version, start_time, end_time, termination;
  std::vector<std::string> files;
  std::vector<std::pair<std::string, std::string>> extra;
};
void write_manifest(const std::filesystem::path& dir, const Manifest& m);
std::string utc_now();

}  // namespace shellflow
