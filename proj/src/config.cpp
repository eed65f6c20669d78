#include "shellflow/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "shellflow/errors.hpp"

namespace shellflow {

namespace {

std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, r.ptr};
}

template <class T>
T parse_number(const std::string& s, const std::string& key) {
  T v{};
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end)
    throw Error(ErrorKind::Config, "bad numeric value '" + s + "' for " + key);
  return v;
}

struct Entry {
  ConfigKey key;
  std::function<void(SimConfig&, const std::string&)> set;
  std::function<std::string(const SimConfig&)> get;
};

Entry real(const char* sec, const char* name, const char* doc, double SimConfig::*m) {
  const std::string k = std::string(sec) + "." + name;
  return {{sec, name, doc},
          [m, k](SimConfig& c, const std::string& v) { c.*m = parse_number<double>(v, k); },
          [m](const SimConfig& c) { return fmt(c.*m); }};
}

Entry fluid_real(const char* sec, const char* name, const char* doc, double FluidParams::*m) {
  const std::string k = std::string(sec) + "." + name;
  return {{sec, name, doc},
          [m, k](SimConfig& c, const std::string& v) { c.fluid.*m = parse_number<double>(v, k); },
          [m](const SimConfig& c) { return fmt(c.fluid.*m); }};
}

Entry shell_real(const char* name, const char* doc, double ShellParams::*m) {
  const std::string k = std::string("shell.") + name;
  return {{"shell", name, doc},
          [m, k](SimConfig& c, const std::string& v) { c.fluid.shell.*m = parse_number<double>(v, k); },
          [m](const SimConfig& c) { return fmt(c.fluid.shell.*m); }};
}

template <class I>
Entry integer(const char* sec, const char* name, const char* doc, std::function<I&(SimConfig&)> ref) {
  const std::string k = std::string(sec) + "." + name;
  return {{sec, name, doc},
          [ref, k](SimConfig& c, const std::string& v) { ref(c) = parse_number<I>(v, k); },
          [ref](const SimConfig& c) { return std::to_string(ref(const_cast<SimConfig&>(c))); }};
}

Entry text(const char* sec, const char* name, const char* doc, std::string SimConfig::*m) {
  return {{sec, name, doc}, [m](SimConfig& c, const std::string& v) { c.*m = v; },
          [m](const SimConfig& c) { return c.*m; }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> e = [] {
    std::vector<Entry> v;
    v.push_back(integer<int>("grid", "n1", "nodes along x1 (top chart and slab)", [](SimConfig& c) -> int& { return c.grid.n1; }));
    v.push_back(integer<int>("grid", "n2", "nodes along x2", [](SimConfig& c) -> int& { return c.grid.n2; }));
    v.push_back(integer<int>("grid", "nz", "cells across the slab depth", [](SimConfig& c) -> int& { return c.grid.nz; }));
    v.push_back({{"grid", "L1", "period along x1"},
                 [](SimConfig& c, const std::string& s) { c.grid.L1 = parse_number<double>(s, "grid.L1"); },
                 [](const SimConfig& c) { return fmt(c.grid.L1); }});
    v.push_back({{"grid", "L2", "period along x2"},
                 [](SimConfig& c, const std::string& s) { c.grid.L2 = parse_number<double>(s, "grid.L2"); },
                 [](const SimConfig& c) { return fmt(c.grid.L2); }});
    v.push_back({{"grid", "Lz", "slab depth"},
                 [](SimConfig& c, const std::string& s) { c.grid.Lz = parse_number<double>(s, "grid.Lz"); },
                 [](const SimConfig& c) { return fmt(c.grid.Lz); }});
    v.push_back(fluid_real("fluid", "nu", "kinematic viscosity", &FluidParams::nu));
    v.push_back(fluid_real("fluid", "theta", "divergence penalization parameter", &FluidParams::theta));
    v.push_back(fluid_real("fluid", "kappa", "boundary artificial viscosity", &FluidParams::kappa));
    v.push_back(real("fluid", "eps_mollify", "coefficient mollifier width (length, <0: two spacings)", &SimConfig::eps_mollify));
    v.push_back(real("fluid", "eps1_mollify", "boundary mollifier width (length, <0: two spacings)", &SimConfig::eps1_mollify));
    v.push_back(fluid_real("fluid", "mollifier_order", "surface mollifier order p", &FluidParams::mollifier_order));
    v.push_back(fluid_real("time", "dt", "time step", &FluidParams::dt));
    v.push_back(real("time", "T", "final time", &SimConfig::T));
    v.push_back(shell_real("sigma", "bending modulus", &ShellParams::sigma));
    v.push_back(shell_real("gamma", "membrane tension", &ShellParams::gamma));
    v.push_back(shell_real("sigma_K", "Gauss curvature modulus", &ShellParams::sigma_K));
    v.push_back(shell_real("thickness", "tubular neighbourhood half-width", &ShellParams::thickness));
    v.push_back(shell_real("smallness", "coercivity ball: H2 norm of h below smallness * thickness", &ShellParams::smallness));
    v.push_back(text("initial", "velocity", "zero | shear | compliant | cellular", &SimConfig::velocity));
    v.push_back(real("initial", "velocity_amplitude", "initial velocity amplitude", &SimConfig::velocity_amplitude));
    v.push_back(text("initial", "height", "zero | bump | random", &SimConfig::height));
    v.push_back(real("initial", "height_amplitude", "max |h0|", &SimConfig::height_amplitude));
    v.push_back(integer<int>("initial", "height_mode", "bump wavenumber or max random mode", [](SimConfig& c) -> int& { return c.height_mode; }));
    v.push_back(text("forcing", "type", "none | gravity | shear", &SimConfig::forcing));
    v.push_back(real("forcing", "amplitude", "forcing amplitude", &SimConfig::forcing_amplitude));
    v.push_back(real("picard", "tol", "sweep-to-sweep Y-metric tolerance", &SimConfig::picard_tol));
    v.push_back(integer<int>("picard", "max_sweeps", "sweep limit per step (or per window)", [](SimConfig& c) -> int& { return c.picard_max_sweeps; }));
    v.push_back({{"picard", "mode", "step | window"},
                 [](SimConfig& c, const std::string& s) {
                   if (s == "step") c.picard_mode = PicardMode::PerStep;
                   else if (s == "window") c.picard_mode = PicardMode::Window;
                   else throw Error(ErrorKind::Config, "picard.mode must be step or window, got '" + s + "'");
                 },
                 [](const SimConfig& c) { return std::string(c.picard_mode == PicardMode::PerStep ? "step" : "window"); }});
    v.push_back({{"picard", "guess", "previous | extrapolated"},
                 [](SimConfig& c, const std::string& s) {
                   if (s == "previous") c.picard_guess = PicardGuess::Previous;
                   else if (s == "extrapolated") c.picard_guess = PicardGuess::Extrapolated;
                   else throw Error(ErrorKind::Config, "picard.guess must be previous or extrapolated, got '" + s + "'");
                 },
                 [](const SimConfig& c) {
                   return std::string(c.picard_guess == PicardGuess::Previous ? "previous" : "extrapolated");
                 }});
    v.push_back(real("ball", "M", "Y_T norm budget", &SimConfig::M_ball));
    v.push_back(integer<int>("ball", "coercivity_samples", "random probes per step, 0 disables", [](SimConfig& c) -> int& { return c.coercivity_samples; }));
    v.push_back(real("ball", "coercivity_threshold", "flag when the measured constant drops below", &SimConfig::coercivity_threshold));
    v.push_back({{"solver", "backend", "spectral | fd"},
                 [](SimConfig& c, const std::string& s) { c.fluid.backend = parse_backend(s); },
                 [](const SimConfig& c) { return std::string(backend_name(c.fluid.backend)); }});
    v.push_back(fluid_real("solver", "linear_tol", "relative Krylov tolerance", &FluidParams::linear_tol));
    v.push_back(integer<int>("solver", "linear_max_iter", "Krylov iteration limit", [](SimConfig& c) -> int& { return c.fluid.linear_max_iter; }));
    v.push_back(integer<std::uint64_t>("run", "seed", "seed for every random draw", [](SimConfig& c) -> std::uint64_t& { return c.seed; }));
    v.push_back(integer<int>("run", "checkpoint_every", "steps between checkpoints, 0: final only", [](SimConfig& c) -> int& { return c.checkpoint_every; }));
    return v;
  }();
  return e;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

FluidParams SimConfig::fluid_params() const {
  FluidParams p = fluid;
  const double h = grid.h1();
  p.eps = eps_mollify < 0.0 ? 2.0 * h : eps_mollify;
  p.eps1 = eps1_mollify < 0.0 ? 2.0 * h : eps1_mollify;
  return p;
}

long SimConfig::steps() const { return std::lround(T / fluid.dt); }

SimConfig desk_config() {
  SimConfig c;
  c.fluid.nu = 1.0;
  c.fluid.theta = 1e-3;
  c.fluid.kappa = 1e-4;
  c.fluid.dt = 1e-3;
  c.fluid.shell.sigma = 1.0;
  c.fluid.shell.gamma = 0.1;
  c.fluid.shell.thickness = 0.25;
  c.fluid.shell.smallness = 4.0;
  return c;
}

SimConfig parse_config(const std::string& text, const SimConfig& base) {
  std::map<std::string, const Entry*> index;
  std::set<std::string> sections;
  for (const Entry& e : entries()) {
    index[e.key.section + "." + e.key.name] = &e;
    sections.insert(e.key.section);
  }
  SimConfig c = base;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line, section;
  int no = 0;
  while (std::getline(is, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::Config, where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw Error(ErrorKind::Config, where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Config, where + "expected key = value");
    if (section.empty()) throw Error(ErrorKind::Config, where + "key outside of a section");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = index.find(key);
    if (it == index.end()) throw Error(ErrorKind::Config, where + "unknown key " + key);
    if (!seen.insert(key).second) throw Error(ErrorKind::Config, where + "duplicate key " + key);
    if (value.empty()) throw Error(ErrorKind::Config, where + "empty value for " + key);
    try {
      it->second->set(c, value);
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, where + e.what());
    }
  }
  return c;
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Usage, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const SimConfig& c) {
  std::string out, section;
  for (const Entry& e : entries()) {
    if (e.key.section != section) {
      section = e.key.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += e.key.name + " = " + e.get(c) + "\n";
  }
  return out;
}

std::string config_hash(const SimConfig& c) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : to_text(c)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void validate(const SimConfig& c) {
  const FluidParams p = c.fluid_params();
  validate(p, c.grid);
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, m); };
  if (!(c.T > 0.0)) fail("time.T must be positive");
  if (c.fluid.dt > c.T) fail("time.dt exceeds time.T");
  if (std::abs(c.steps() * c.fluid.dt - c.T) > 1e-9 * c.T) fail("time.T must be a whole number of steps");
  if (!(c.picard_tol > 0.0)) fail("picard.tol must be positive");
  if (c.picard_max_sweeps < 1) fail("picard.max_sweeps must be at least 1");
  if (!(c.M_ball > 0.0)) fail("ball.M must be positive");
  if (c.coercivity_samples < 0) fail("ball.coercivity_samples must be non-negative");
  if (!(c.coercivity_threshold > 0.0 && c.coercivity_threshold <= 1.0))
    fail("ball.coercivity_threshold must lie in (0, 1]");
  if (c.height != "zero" && c.height != "bump" && c.height != "random")
    fail("initial.height must be zero, bump or random, got '" + c.height + "'");
  if (c.height_mode < 1) fail("initial.height_mode must be at least 1");
  if (c.forcing != "none" && c.forcing != "gravity" && c.forcing != "shear")
    fail("forcing.type must be none, gravity or shear, got '" + c.forcing + "'");
  if (c.checkpoint_every < 0) fail("run.checkpoint_every must be non-negative");
  // Lagrangian mesh CFL: the initial flow must not move a node by more than
  // half a cell per step.
  const double hmin = std::min({c.grid.h1(), c.grid.h2(), c.grid.hz()});
  if (std::abs(c.velocity_amplitude) * c.fluid.dt > 0.5 * hmin)
    fail("time.dt violates the mesh CFL bound |u0| dt <= h/2");
  velocity_preset(c.velocity, c.velocity_amplitude, c.grid);
}

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> s = [] {
    std::vector<ConfigKey> v;
    for (const Entry& e : entries()) v.push_back(e.key);
    return v;
  }();
  return s;
}

}  // namespace shellflow
