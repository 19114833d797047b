#pragma once

#include <cstdint>
#include <string>

#include "blastcast/field.hpp"
#include "blastcast/frames.hpp"
#include "blastcast/scenario.hpp"

namespace blastcast::euler2d {

enum class EdgeCondition {
  kTransmissive,  ///< zero-gradient ghost cells; waves leave the domain
  kReflective,    ///< mirror-velocity ghost cells; closed box
};

struct SolverConfig {
  double gamma = 1.4;
  double cfl = 0.4;
  double ambient_pressure = 102759.0;  // Pa
  double ambient_density = 1.225;      // kg/m^3
  double t_end = 0.15;                 // s
  int n_out = 290;
  double source_radius = 2.0;  // m, energy-deposition disk
  double depth = 1.0;          // m, slab thickness carrying the energy
  EdgeCondition edges = EdgeCondition::kTransmissive;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  double dt_out() const { return t_end / (n_out - 1); }
};

/// TNT detonation constants. Only the energy per unit mass enters the
/// initial condition; the JWL coefficients are kept for reference.
struct DetonationConstants {
  double e0 = 7000.0;    // MJ/m^3, internal energy per unit volume
  double rho0 = 1630.0;  // kg/m^3
  double jwl_a = 3.71e5;  // MPa
  double jwl_b = 3.23e3;  // MPa
  double jwl_r1 = 4.15;
  double jwl_r2 = 0.95;
  double jwl_omega = 0.3;
  double detonation_velocity = 6930.0;  // m/s

  double specific_energy() const { return e0 / rho0; }  // MJ/kg
};

/// Energy (J) released by `charge_kg` of explosive.
double released_energy(double charge_kg, const DetonationConstants& k = {});

/// Cell-wise conserved variables with E the volumetric total energy.
struct ConservedState {
  GridSpec grid;
  FieldD rho;
  FieldD rho_u;
  FieldD rho_v;
  FieldD energy;
  Field<std::uint8_t> solid;  // 1 = obstacle cell, never updated

  /// Uniform quiescent gas.
  static ConservedState uniform(const GridSpec& grid, double rho, double p,
                                double gamma);

  bool is_solid(int i, int j) const { return solid(i, j) != 0; }
  double total_mass() const;
  double total_energy() const;
};

/// Ambient air plus the source energy disk; obstacle cells flagged solid.
/// Throws Error(kSourceOccluded) when no fluid cell can receive the energy.
ConservedState init_state(const ScenarioCase& c, const GridSpec& grid,
                          const SolverConfig& cfg,
                          const DetonationConstants& k = {});

/// P = (gamma - 1)(E - (rho_u^2 + rho_v^2) / (2 rho)). Throws SolverError
/// naming the first fluid cell with a non-positive or non-finite pressure.
FieldD eos_pressure(const ConservedState& state, double gamma);

/// cfl * min over fluid cells of min(dx, dy) / (|u| + |v| + c).
double stable_dt(const ConservedState& state, const SolverConfig& cfg);

/// One forward-Euler finite-volume update with the Rusanov flux.
/// `step_index` only labels diagnostics.
ConservedState step(const ConservedState& state, double dt,
                    const SolverConfig& cfg, long step_index = -1);

struct SimulationOutput {
  FrameSequence frames;
  ConservedState final_state;
  long steps = 0;
};

/// Advances to cfg.t_end and records cfg.n_out uniformly spaced pressure
/// frames. The step size is clipped so that a step lands on every output
/// time, and the frame is the state at that step.
SimulationOutput run(const ConservedState& initial, const SolverConfig& cfg,
                     const std::string& case_id);

FrameSequence simulate(const ScenarioCase& c, const GridSpec& grid,
                       const SolverConfig& cfg);

}  // namespace blastcast::euler2d
