#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shellflow/fluid.hpp"

namespace shellflow {

enum class PicardMode { PerStep, Window };
enum class PicardGuess { Previous, Extrapolated };

// Everything one run depends on. Canonical text (to_text) round-trips
// through parse_config bit-exactly and feeds the config hash.
struct SimConfig {
  Grid3 grid{32, 32, 24, 1.0, 1.0, 1.0};
  FluidParams fluid;           // eps/eps1 are resolved from the fields below
  double eps_mollify = -1.0;   // length; < 0 means two top-grid spacings
  double eps1_mollify = -1.0;
  double T = 0.1;

  std::string velocity = "zero";   // velocity_preset name
  double velocity_amplitude = 0.0;
  std::string height = "bump";     // zero | bump | random
  double height_amplitude = 0.01;
  int height_mode = 1;             // bump wavenumber or max random mode

  std::string forcing = "none";    // none | gravity | shear
  double forcing_amplitude = 0.0;

  double picard_tol = 1e-8;
  int picard_max_sweeps = 8;
  PicardMode picard_mode = PicardMode::PerStep;
  PicardGuess picard_guess = PicardGuess::Extrapolated;

  double M_ball = 1e8;
  int coercivity_samples = 4;      // per step; 0 disables the check
  double coercivity_threshold = 0.5;

  std::uint64_t seed = 0;
  int checkpoint_every = 0;        // steps; 0 writes only the final checkpoint

  // FluidParams with the mollifier widths resolved.
  FluidParams fluid_params() const;
  long steps() const;  // round(T / dt)
};

// Reference configuration: 32x32x24 slab, nu = sigma = 1, gamma = 0.1,
// theta = 1e-3, kappa = 1e-4, eps = eps1 = 2 spacings, dt = 1e-3, T = 0.1,
// F = 0, u0 = 0 and a 0.01 cosine bump in h0.
SimConfig desk_config();

// Sections [grid] [fluid] [time] [shell] [initial] [forcing] [picard]
// [ball] [solver] [run]; "key = value" lines, '#' comments. Unknown
// sections or keys, duplicates and malformed values are config errors
// naming the line. Keys absent from the text keep the value in base.
SimConfig parse_config(const std::string& text, const SimConfig& base = desk_config());
SimConfig load_config(const std::filesystem::path& path);
std::string to_text(const SimConfig& c);
// FNV-1a of the canonical text, 16 hex digits.
std::string config_hash(const SimConfig& c);
void validate(const SimConfig& c);

struct ConfigKey {
  std::string section, name, doc;
};
const std::vector<ConfigKey>& config_schema();

}  // namespace shellflow
