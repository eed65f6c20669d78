#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "shellflow/fluid.hpp"

namespace shellflow {

// ||f||_{H^s} on the chart with weights (1 + |k|^2)^{s/2}; s = 0 is the
// nodal L2 norm with cell-area weights.
double sobolev_norm(const Grid2& g, const Field& f, double s);

// Sum over |alpha| <= k of ||d^alpha v||^2 on the slab, derivatives by
// centred differences (periodic in x1, x2, one-sided second order at the
// walls), lumped-mass L2. Square root returned.
double volume_sobolev_norm(const Grid3& g, const Vec3Field& v, int k);
// All four orders k = 0..3 from one pass.
std::array<double, 4> volume_sobolev_norms(const Grid3& g, const Vec3Field& v);

// int Atilde^{abcd} f_ab f_cd sqrt(g0) dy with the linearized bending tensor at hbar.
double elliptic_energy(const ReferenceSurface& s, const Field& hbar, const Field& f, const Diff& D);
double elliptic_bilinear(const ReferenceSurface& s, const Field& hbar, const Field& f,
                         const Field& g, const Diff& D);
// sum_ab ||f_ab||^2 with flat partial derivatives.
double hessian_norm2(const ReferenceSurface& s, const Field& f, const Diff& D);

struct CoercivityReport {
  double nu1 = 0.0;        // min ratio E(f) / ||grad0^2 f||^2
  bool violated = false;   // nu1 below the requested threshold
};
// Random trigonometric f with modes up to n/4; deterministic for a given rng state.
CoercivityReport coercivity(const ReferenceSurface& s, const Field& hbar, const Diff& D, int samples,
                            double threshold, std::mt19937_64& rng);

// Per-step norm sample. Time derivatives are backward differences of the
// stored snapshots.
struct NormSample {
  double t = 0.0;
  double v_H[4] = {0, 0, 0, 0};
  double vt_H1 = 0.0;
  double h_H2 = 0.0, h_H4 = 0.0, h_H55 = 0.0;
  double ht_H2 = 0.0, ht_H25 = 0.0;
  double htt_H05 = 0.0;
};

// Running Y_T norm: time integrals by the rectangle rule, sups over samples.
class NormAccumulator {
 public:
  void add(const NormSample& s, double dt);
  double y_norm2() const;
  double x_norm2() const;
  // Internal sums, for checkpointing.
  std::array<double, 8> raw() const;
  static NormAccumulator from_raw(const std::array<double, 8>& r);

 private:
  double int_v3_ = 0, int_vt1_ = 0, int_h55_ = 0, int_ht25_ = 0, int_htt05_ = 0;
  double sup_v2_ = 0, sup_h4_ = 0, sup_ht2_ = 0;
};

struct BallStatus {
  bool inside = true;
  double exit_time = 0.0;  // valid when !inside
};
// First sample after which ||(v,h)||^2_{Y_T} exceeds M.
BallStatus ball_check(const std::vector<NormSample>& history, double dt, double M);

// Energies of one state and the balance of one step.
struct EnergyRow {
  double t = 0.0;
  double kinetic = 0.0;
  double elastic = 0.0;   // E_ben + E_mem of K_eps1 h
  double bending = 0.0;
  double membrane = 0.0;
  double viscous = 0.0, kappa = 0.0, penalty = 0.0;  // step integrals
  double forcing_work = 0.0, pressure_work = 0.0;
  double residual = 0.0;  // |dE/dt + dissipation rate - work rate|
  double total() const { return kinetic + elastic; }
};
EnergyRow energy_state(const FluidState& st, const ReferenceSurface& s, const FluidParams& p);
EnergyRow energy_balance(const EnergyRow& before, const FluidState& after, const StepReport& rep,
                         const ReferenceSurface& s, const FluidParams& p);

// True when total() never increases by more than tol after the first skip rows.
bool energy_nonincreasing(const std::vector<EnergyRow>& rows, int skip, double tol);

// Delimited text output: header line, then one row per record.
void write_csv(std::ostream& os, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace shellflow
