#pragma once

#include <Eigen/Sparse>
#include <filesystem>
#include <vector>

#include "reskit/fluid.hpp"
#include "reskit/grid.hpp"
#include "reskit/relperm.hpp"
#include "reskit/transmissibility.hpp"
#include "reskit/wells.hpp"

namespace reskit::sim {

struct SimConfig {
  double total_time_days = 1000.0;
  double step_days = 100.0;    // pressure/reporting step; saturation sub-steps under CFL
  double p_init = 1000.0;      // psia
  double sw_init = -1.0;       // < 0 means "start at connate water"
  double cfl = 0.9;
  double pressure_tol = 1e-9;  // relative CG tolerance
  int max_pressure_iters = 5000;
  int max_substeps = 200000;   // per reporting step; exceeding it is a solver error
};

// Linear system A p = b for the implicit pressure step, SPD when at least
// one BHP-controlled well is present. Matrix entries are total-mobility
// transmissibilities (bbl/day/psi), rhs is in bbl/day.
struct PressureSystem {
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
};

// Per-layer well coupling coefficient 0.001127 * 2*pi * WI (bbl/day/psi per cp^-1).
struct LayerCoef {
  std::size_t cell = 0;
  double coef = 0.0;
};

std::vector<std::vector<LayerCoef>> well_layer_coefs(const ScalarField& perm,
                                                     const std::vector<WellSpec>& wells);

// Face mobilities are arithmetic averages of the adjacent cell total mobilities.
// With require_bhp_well the assembly refuses an all-rate well set, whose
// incompressible pressure system is singular.
PressureSystem assemble_pressure_system(const FaceTransmissibility& trans,
                                        const RelPermTable& relperm, const FluidModel& fluid,
                                        const std::vector<WellSpec>& wells,
                                        const std::vector<std::vector<LayerCoef>>& coefs,
                                        const std::vector<double>& sw,
                                        bool require_bhp_well = true);

// Preconditioned conjugate gradients; throws SolverError when the tolerance
// is not reached. warm_start may be null.
Eigen::VectorXd solve_pressure(const PressureSystem& sys, double tol, int max_iters,
                               const Eigen::VectorXd* warm_start = nullptr);

// Instantaneous well rates evaluated on a (pressure, saturation) snapshot.
// Producers report positive rates; injectors report water_stb_d < 0 and a
// back-computed bottom-hole pressure when rate-controlled.
std::vector<WellRates> well_rates(const ScalarField& perm, const RelPermTable& relperm,
                                  const FluidModel& fluid, const std::vector<WellSpec>& wells,
                                  const std::vector<double>& pressure,
                                  const std::vector<double>& sw);

// One reporting step: pressure held fixed, explicit upwind saturation
// transport advanced in CFL-limited sub-steps.
struct TransportTotals {
  int substeps = 0;
  double injected_water_stb = 0.0;
  double produced_water_stb = 0.0;
  double produced_oil_stb = 0.0;
};

TransportTotals update_saturation(const FaceTransmissibility& trans, const ScalarField& poro,
                                  const RelPermTable& relperm, const FluidModel& fluid,
                                  const std::vector<WellSpec>& wells,
                                  const std::vector<std::vector<LayerCoef>>& coefs,
                                  const std::vector<double>& pressure, std::vector<double>& sw,
                                  double dt_days, double cfl, int max_substeps = 0);

struct StepRecord {
  double time_days = 0.0;        // end of the reporting step
  std::vector<double> pressure;  // solved at step start, held over the step
  std::vector<double> sw;        // at time_days
  std::vector<WellRates> rates;  // well_rates(pressure, sw)
  int substeps = 0;
};

struct SimulationResult {
  GridSpec grid;
  std::vector<double> sw_init;
  std::vector<StepRecord> steps;
  double injected_water_stb = 0.0;
  double produced_water_stb = 0.0;
  double produced_oil_stb = 0.0;
  double initial_water_in_place_stb = 0.0;
  double final_water_in_place_stb = 0.0;
};

SimulationResult run_simulation(const ScalarField& perm, const ScalarField& poro,
                                const RelPermTable& relperm, const FluidModel& fluid,
                                const std::vector<WellSpec>& wells, const SimConfig& config);

// Mean-square residuals of the discrete equations on recorded states: the
// pressure system residual at each step start, and the terminal mismatch of a
// replayed sub-stepped transport update, expressed as a rate. Consistent
// simulator output scores orders of magnitude below perturbed states.
// Units: (bbl/day)^2 for both parts.
struct PdeResidual {
  double v_pressure = 0.0;
  double v_saturation = 0.0;
  double total() const { return v_pressure + v_saturation; }
};

PdeResidual pde_residual(const ScalarField& perm, const ScalarField& poro,
                         const RelPermTable& relperm, const FluidModel& fluid,
                         const std::vector<WellSpec>& wells, const SimulationResult& result);

// rates.csv: time,well,oil_stb_d,water_stb_d,water_cut,bhp_psia with one row
// per (reporting step, well).
void write_rates_csv(const std::filesystem::path& path, const SimulationResult& result);

double water_in_place_stb(const ScalarField& poro, const std::vector<double>& sw);

}  // namespace reskit::sim
