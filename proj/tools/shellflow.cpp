#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "shellflow/driver.hpp"
#include "shellflow/errors.hpp"
#include "shellflow/verify.hpp"

using namespace shellflow;

namespace {

struct Globals {
  std::string config_path, out_dir;
  int checkpoint_every = -1;
  std::optional<std::uint64_t> seed;
};

SimConfig load(const Globals& g) {
  SimConfig c = g.config_path.empty() ? desk_config() : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  validate(c);
  return c;
}

std::optional<std::filesystem::path> out_path(const Globals& g) {
  if (g.out_dir.empty()) return std::nullopt;
  return std::filesystem::path(g.out_dir);
}

// Writes a text file into the output directory and returns its name.
std::string write_text(const std::filesystem::path& dir, const std::string& name, const std::string& body) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / name, std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + (dir / name).string());
  os << body;
  return name;
}

void finish_manifest(const std::filesystem::path& dir, const SimConfig& c, const std::string& start,
                     const std::string& reason, std::vector<std::string> files) {
  Manifest m;
  m.config_hash = config_hash(c);
  m.version = code_version();
  m.start_time = start;
  m.end_time = utc_now();
  m.termination = reason;
  files.push_back("manifest.txt");
  m.files = std::move(files);
  write_manifest(dir, m);
}

int cmd_simulate(const Globals& g, const std::string& resume, long stop_after, double perturb, bool window,
                 bool verbose) {
  SimConfig c = load(g);
  if (window) c.picard_mode = PicardMode::Window;
  RunOptions o;
  o.out_dir = out_path(g);
  o.checkpoint_every = g.checkpoint_every;
  o.stop_after_step = stop_after;
  o.guess_perturbation = perturb;
  o.verbose = verbose;
  if (!resume.empty()) o.resume = resume;
  const RunResult r = run(c, o);
  std::cout << "termination: " << r.reason << "\n"
            << "steps: " << r.final_state.step << "  t: " << r.final_state.t << "\n";
  if (!r.rows.empty()) {
    const auto& h = Simulation::header();
    const auto& last = r.rows.back();
    for (size_t k = 0; k < h.size(); ++k) std::cout << "  " << h[k] << " = " << last[k] << "\n";
  }
  if (r.coercivity_flagged) std::cout << "coercivity flag raised inside the smallness ball\n";
  return r.exit_code;
}

int cmd_verify(const Globals& g) {
  const SimConfig c = load(g);
  const std::string start = utc_now();
  const auto lines = verify_identities(c);
  std::ostringstream os;
  os << std::setprecision(6);
  bool ok = true;
  for (const auto& l : lines) {
    os << (l.pass() ? "PASS " : "FAIL ") << l.name << ": " << l.value << (l.upper ? " <= " : " >= ") << l.limit
       << "\n";
    ok = ok && l.pass();
  }
  std::cout << os.str();
  if (auto dir = out_path(g)) {
    std::vector<std::string> files{write_text(*dir, "verify.txt", os.str())};
    finish_manifest(*dir, c, start, ok ? "completed" : "verification failed", files);
  }
  return ok ? 0 : 1;
}

int cmd_sweep(const Globals& g, const std::string& param, int halvings) {
  const SimConfig c = load(g);
  const std::string start = utc_now();
  const SweepReport r = parameter_sweep(c, param, halvings);
  std::ostringstream os;
  os << std::setprecision(10) << param << "," << r.metric << ",final_divergence_l2,theta_q2,max_sweeps\n";
  for (const auto& p : r.points)
    os << p.value << "," << p.metric << "," << p.final_divergence << "," << p.theta_q2 << "," << p.max_sweeps
       << "\n";
  std::cout << os.str() << "fitted slope: " << r.slope << "\n"
            << "seconds: " << r.seconds << "\n";
  if (auto dir = out_path(g)) {
    std::vector<std::string> files{write_text(*dir, "sweep.csv", os.str())};
    finish_manifest(*dir, c, start, "completed", files);
  }
  return 0;
}

int cmd_diagnose(const Globals& g, const std::string& checkpoint) {
  const FieldContainer f = FieldContainer::load(checkpoint);
  // The checkpoint carries its own configuration; an explicit one must match.
  SimConfig c = parse_config(f.text("config"));
  if (!g.config_path.empty()) {
    const SimConfig given = load(g);
    if (config_hash(given) != config_hash(c))
      throw Error(ErrorKind::Config, "checkpoint " + checkpoint + " was written with a different configuration");
  }
  const std::string start = utc_now();
  Simulation sim(make_setup(c));
  sim.restore(f);
  std::ostringstream os;
  os << std::setprecision(17) << "name,value\n";
  for (const auto& [k, v] : state_diagnostics(sim.setup(), sim.state())) os << k << "," << v << "\n";
  std::cout << os.str();
  if (auto dir = out_path(g)) {
    std::vector<std::string> files{write_text(*dir, "state_diagnostics.csv", os.str())};
    finish_manifest(*dir, c, start, "completed", files);
  }
  return 0;
}

int cmd_schema() {
  for (const auto& k : config_schema()) std::cout << "[" << k.section << "] " << k.name << ": " << k.doc << "\n";
  std::cout << "\n# defaults\n" << to_text(desk_config());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shellflow: Lagrangian Navier-Stokes flow under an elastic Willmore shell"};
  app.set_version_flag("--version", std::string(code_version()));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "configuration file (default: the desk configuration)");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--checkpoint-every", g.checkpoint_every, "steps between checkpoints (0: final only)")
      ->check(CLI::NonNegativeNumber);
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "random seed");

  auto* sim = app.add_subcommand("simulate", "run the coupled solver");
  std::string resume;
  long stop_after = -1;
  double perturb = 0.0;
  bool window = false, verbose = false;
  sim->add_option("--resume", resume, "continue from a checkpoint");
  sim->add_option("--stop-after", stop_after, "stop after this step");
  sim->add_option("--perturb-guess", perturb, "scale of a seeded perturbation of every Picard guess");
  sim->add_flag("--window", window, "whole-window Picard iteration");
  sim->add_flag("-v,--verbose", verbose, "progress on stderr");

  auto* ver = app.add_subcommand("verify-identities", "geometric, variational and solver identity checks");

  auto* sw = app.add_subcommand("sweep", "parameter sweep with a log-log rate fit");
  std::string param = "theta";
  int halvings = 5;
  sw->add_option("--param", param, "theta | kappa | eps | eps1")
      ->check(CLI::IsMember({"theta", "kappa", "eps", "eps1"}));
  sw->add_option("--halvings", halvings, "number of halvings")->check(CLI::PositiveNumber);

  auto* dia = app.add_subcommand("diagnose", "re-emit diagnostics from a checkpoint");
  std::string checkpoint;
  dia->add_option("checkpoint", checkpoint, "checkpoint file")->required();

  auto* sch = app.add_subcommand("schema", "list configuration keys and defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Usage);
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*sim) return cmd_simulate(g, resume, stop_after, perturb, window, verbose);
    if (*ver) return cmd_verify(g);
    if (*sw) return cmd_sweep(g, param, halvings);
    if (*dia) return cmd_diagnose(g, checkpoint);
    if (*sch) return cmd_schema();
  } catch (const Error& e) {
    std::cerr << "error (" << error_kind_name(e.kind()) << "): " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return static_cast<int>(ErrorKind::Io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return static_cast<int>(ErrorKind::Usage);
}
