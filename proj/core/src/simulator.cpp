#include "reskit/sim/simulator.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <cmath>
#include <sstream>

#include "reskit/errors.hpp"
#include "reskit/io.hpp"
#include "reskit/units.hpp"

namespace reskit::sim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Mobility {
  double lw = 0.0;
  double lo = 0.0;
  double lt = 0.0;
};

Mobility mobility(const RelPermTable& relperm, const FluidModel& fluid, double sw) {
  Mobility m;
  m.lw = relperm.krw(sw) / fluid.mu_w;
  m.lo = relperm.kro(sw) / fluid.mu_o;
  m.lt = m.lw + m.lo;
  return m;
}

struct FaceFluxes {
  std::vector<double> fx, fy, fz;  // bbl/day, positive along +axis
};

// Total Darcy fluxes for a fixed saturation snapshot; mobilities are the same
// arithmetic face averages the assembly uses, so the fluxes are discretely
// divergence-free against the well sources once the pressure is solved.
FaceFluxes face_fluxes(const FaceTransmissibility& trans, const RelPermTable& relperm,
                       const FluidModel& fluid, const std::vector<double>& pressure,
                       const std::vector<double>& sw) {
  const GridSpec& g = trans.grid;
  FaceFluxes f;
  f.fx.assign(trans.tx.size(), 0.0);
  f.fy.assign(trans.ty.size(), 0.0);
  f.fz.assign(trans.tz.size(), 0.0);

  std::vector<double> lt(sw.size());
  for (std::size_t c = 0; c < sw.size(); ++c) lt[c] = mobility(relperm, fluid, sw[c]).lt;

  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i + 1 < g.nx; ++i) {
        const std::size_t l = g.index(i, j, k), r = g.index(i + 1, j, k);
        f.fx[trans.x_index(i, j, k)] =
            trans.tx[trans.x_index(i, j, k)] * 0.5 * (lt[l] + lt[r]) * (pressure[l] - pressure[r]);
      }
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j + 1 < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const std::size_t l = g.index(i, j, k), r = g.index(i, j + 1, k);
        f.fy[trans.y_index(i, j, k)] =
            trans.ty[trans.y_index(i, j, k)] * 0.5 * (lt[l] + lt[r]) * (pressure[l] - pressure[r]);
      }
  for (int k = 0; k + 1 < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const std::size_t l = g.index(i, j, k), r = g.index(i, j, k + 1);
        f.fz[trans.z_index(i, j, k)] =
            trans.tz[trans.z_index(i, j, k)] * 0.5 * (lt[l] + lt[r]) * (pressure[l] - pressure[r]);
      }
  return f;
}

// Realized per-layer total sandface rates (bbl/day, positive out of the
// reservoir), consistent with the assembled pressure equation.
std::vector<std::vector<double>> well_layer_rates(const std::vector<WellSpec>& wells,
                                                  const std::vector<std::vector<LayerCoef>>& coefs,
                                                  const RelPermTable& relperm,
                                                  const FluidModel& fluid,
                                                  const std::vector<double>& pressure,
                                                  const std::vector<double>& sw) {
  std::vector<std::vector<double>> rates(wells.size());
  for (std::size_t w = 0; w < wells.size(); ++w) {
    const WellSpec& spec = wells[w];
    const auto& layers = coefs[w];
    rates[w].assign(layers.size(), 0.0);
    if (spec.control == WellControl::Bhp) {
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const double lt = mobility(relperm, fluid, sw[layers[l].cell]).lt;
        rates[w][l] = layers[l].coef * lt * (pressure[layers[l].cell] - spec.target);
      }
    } else {
      double sum = 0.0;
      std::vector<double> weight(layers.size());
      for (std::size_t l = 0; l < layers.size(); ++l) {
        weight[l] = layers[l].coef * mobility(relperm, fluid, sw[layers[l].cell]).lt;
        sum += weight[l];
      }
      const double q_out = spec.kind == WellKind::Producer ? spec.target : -spec.target;
      for (std::size_t l = 0; l < layers.size(); ++l) rates[w][l] = q_out * weight[l] / sum;
    }
  }
  return rates;
}

}  // namespace

std::vector<std::vector<LayerCoef>> well_layer_coefs(const ScalarField& perm,
                                                     const std::vector<WellSpec>& wells) {
  const GridSpec& g = perm.grid;
  std::vector<std::vector<LayerCoef>> coefs(wells.size());
  for (std::size_t w = 0; w < wells.size(); ++w) {
    const WellSpec& spec = wells[w];
    for (int k = spec.k0; k <= spec.k1; ++k) {
      LayerCoef lc;
      lc.cell = g.index(spec.i, spec.j, k);
      lc.coef = units::kDarcy * kTwoPi *
                peaceman_well_index(perm.values[lc.cell], g.dz, g.dx, g.dy,
                                    spec.wellbore_radius, spec.skin);
      coefs[w].push_back(lc);
    }
  }
  return coefs;
}

PressureSystem assemble_pressure_system(const FaceTransmissibility& trans,
                                        const RelPermTable& relperm, const FluidModel& fluid,
                                        const std::vector<WellSpec>& wells,
                                        const std::vector<std::vector<LayerCoef>>& coefs,
                                        const std::vector<double>& sw, bool require_bhp_well) {
  const GridSpec& g = trans.grid;
  const std::size_t n = g.num_cells();
  if (sw.size() != n) throw ConfigError("saturation field size mismatch");
  if (require_bhp_well) {
    bool has_bhp = false;
    for (const auto& w : wells) has_bhp = has_bhp || w.control == WellControl::Bhp;
    if (!has_bhp)
      throw ConfigError("incompressible pressure system needs at least one BHP-controlled well");
  }

  std::vector<double> lt(n);
  for (std::size_t c = 0; c < n; ++c) lt[c] = mobility(relperm, fluid, sw[c]).lt;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(7 * n);
  std::vector<double> diag(n, 0.0);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));

  auto couple = [&](std::size_t l, std::size_t r, double t) {
    const double c = t * 0.5 * (lt[l] + lt[r]);
    diag[l] += c;
    diag[r] += c;
    trips.emplace_back(static_cast<int>(l), static_cast<int>(r), -c);
    trips.emplace_back(static_cast<int>(r), static_cast<int>(l), -c);
  };

  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i + 1 < g.nx; ++i)
        couple(g.index(i, j, k), g.index(i + 1, j, k), trans.tx[trans.x_index(i, j, k)]);
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j + 1 < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        couple(g.index(i, j, k), g.index(i, j + 1, k), trans.ty[trans.y_index(i, j, k)]);
  for (int k = 0; k + 1 < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        couple(g.index(i, j, k), g.index(i, j, k + 1), trans.tz[trans.z_index(i, j, k)]);

  for (std::size_t w = 0; w < wells.size(); ++w) {
    const WellSpec& spec = wells[w];
    const auto& layers = coefs[w];
    if (spec.control == WellControl::Bhp) {
      for (const auto& layer : layers) {
        const double c = layer.coef * lt[layer.cell];
        diag[layer.cell] += c;
        b[static_cast<Eigen::Index>(layer.cell)] += c * spec.target;
      }
    } else {
      double sum = 0.0;
      std::vector<double> weight(layers.size());
      for (std::size_t l = 0; l < layers.size(); ++l) {
        weight[l] = layers[l].coef * lt[layers[l].cell];
        sum += weight[l];
      }
      if (sum <= 0.0) throw SolverError("rate well " + spec.name + " has zero injectivity");
      const double q_in = spec.kind == WellKind::Injector ? spec.target : -spec.target;
      for (std::size_t l = 0; l < layers.size(); ++l)
        b[static_cast<Eigen::Index>(layers[l].cell)] += q_in * weight[l] / sum;
    }
  }

  for (std::size_t c = 0; c < n; ++c)
    trips.emplace_back(static_cast<int>(c), static_cast<int>(c), diag[c]);

  PressureSystem sys;
  sys.A.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  sys.A.setFromTriplets(trips.begin(), trips.end());
  sys.A.makeCompressed();
  sys.b = std::move(b);
  return sys;
}

Eigen::VectorXd solve_pressure(const PressureSystem& sys, double tol, int max_iters,
                               const Eigen::VectorXd* warm_start) {
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(max_iters);
  cg.compute(sys.A);
  Eigen::VectorXd p;
  if (warm_start && warm_start->size() == sys.b.size())
    p = cg.solveWithGuess(sys.b, *warm_start);
  else
    p = cg.solve(sys.b);
  if (cg.info() != Eigen::Success) {
    std::ostringstream ss;
    ss << "pressure solve did not converge: " << cg.iterations()
       << " iterations, error " << cg.error();
    throw SolverError(ss.str());
  }
  return p;
}

std::vector<WellRates> well_rates(const ScalarField& perm, const RelPermTable& relperm,
                                  const FluidModel& fluid, const std::vector<WellSpec>& wells,
                                  const std::vector<double>& pressure,
                                  const std::vector<double>& sw) {
  const auto coefs = well_layer_coefs(perm, wells);
  std::vector<WellRates> out(wells.size());
  for (std::size_t w = 0; w < wells.size(); ++w) {
    const WellSpec& spec = wells[w];
    const auto& layers = coefs[w];
    WellRates& r = out[w];
    r.well = spec.name;

    double sum_clt = 0.0, sum_cltp = 0.0;
    for (const auto& layer : layers) {
      const double lt = mobility(relperm, fluid, sw[layer.cell]).lt;
      sum_clt += layer.coef * lt;
      sum_cltp += layer.coef * lt * pressure[layer.cell];
    }

    double pwf = 0.0;
    if (spec.control == WellControl::Bhp) {
      pwf = spec.target;
    } else {
      const double q_out = spec.kind == WellKind::Producer ? spec.target : -spec.target;
      pwf = (sum_cltp - q_out) / sum_clt;
    }
    r.bhp_psia = pwf;

    if (spec.kind == WellKind::Injector) {
      // Injected fluid is water; injectivity runs at total mobility.
      double q = 0.0;
      for (const auto& layer : layers) {
        const double lt = mobility(relperm, fluid, sw[layer.cell]).lt;
        q += layer.coef * lt * (pressure[layer.cell] - pwf);
      }
      r.oil_stb_d = 0.0;
      r.water_stb_d = q;
      r.water_cut = 0.0;
    } else {
      double oil = 0.0, water = 0.0;
      for (const auto& layer : layers) {
        const Mobility m = mobility(relperm, fluid, sw[layer.cell]);
        const double dp = pressure[layer.cell] - pwf;
        oil += layer.coef * m.lo * dp;
        water += layer.coef * m.lw * dp;
      }
      r.oil_stb_d = oil;
      r.water_stb_d = water;
      const double denom = oil + water;
      r.water_cut = denom != 0.0 ? water / denom : 0.0;
    }
  }
  return out;
}

double water_in_place_stb(const ScalarField& poro, const std::vector<double>& sw) {
  const double vcell = poro.grid.cell_volume() / units::kFt3PerBbl;
  double wip = 0.0;
  for (std::size_t c = 0; c < sw.size(); ++c) wip += poro.values[c] * vcell * sw[c];
  return wip;
}

// Frozen-flux sub-step kernel shared by the transport update and the residual
// replay; totals.substeps picks the (equal) sub-step count.
static void run_substeps(const FaceTransmissibility& trans, const std::vector<double>& pv,
                         const RelPermTable& relperm, const FluidModel& fluid,
                         const std::vector<WellSpec>& wells,
                         const std::vector<std::vector<LayerCoef>>& coefs, const FaceFluxes& flux,
                         const std::vector<std::vector<double>>& wrates, std::vector<double>& sw,
                         double dt_days, TransportTotals& totals) {
  const GridSpec& g = trans.grid;
  const std::size_t n = g.num_cells();
  const double dt = dt_days / totals.substeps;

  const double s_lo = relperm.swc();
  const double s_hi = 1.0 - relperm.sor();
  std::vector<double> net(n);
  std::vector<double> fw(n);

  for (int step = 0; step < totals.substeps; ++step) {
    for (std::size_t c = 0; c < n; ++c) fw[c] = relperm.fractional_flow(sw[c], fluid.mu_w, fluid.mu_o);
    std::fill(net.begin(), net.end(), 0.0);

    auto upwind = [&](std::size_t l, std::size_t r, double f) {
      const double wf = (f >= 0.0 ? fw[l] : fw[r]) * f;
      net[l] -= wf;
      net[r] += wf;
    };
    for (int k = 0; k < g.nz; ++k)
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i)
          upwind(g.index(i, j, k), g.index(i + 1, j, k), flux.fx[trans.x_index(i, j, k)]);
    for (int k = 0; k < g.nz; ++k)
      for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
          upwind(g.index(i, j, k), g.index(i, j + 1, k), flux.fy[trans.y_index(i, j, k)]);
    for (int k = 0; k + 1 < g.nz; ++k)
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
          upwind(g.index(i, j, k), g.index(i, j, k + 1), flux.fz[trans.z_index(i, j, k)]);

    for (std::size_t w = 0; w < wells.size(); ++w) {
      const bool injector = wells[w].kind == WellKind::Injector;
      for (std::size_t l = 0; l < coefs[w].size(); ++l) {
        const std::size_t c = coefs[w][l].cell;
        const double q = wrates[w][l];  // bbl/day out of the reservoir
        if (injector) {
          net[c] -= q;
          totals.injected_water_stb += -q * dt;
        } else {
          const double qw = fw[c] * q;
          net[c] -= qw;
          totals.produced_water_stb += qw * dt;
          totals.produced_oil_stb += (q - qw) * dt;
        }
      }
    }

    for (std::size_t c = 0; c < n; ++c) {
      double s = sw[c] + dt / pv[c] * net[c];
      if (s < s_lo) s = s_lo;
      if (s > s_hi) s = s_hi;
      sw[c] = s;
    }
  }
}

TransportTotals update_saturation(const FaceTransmissibility& trans, const ScalarField& poro,
                                  const RelPermTable& relperm, const FluidModel& fluid,
                                  const std::vector<WellSpec>& wells,
                                  const std::vector<std::vector<LayerCoef>>& coefs,
                                  const std::vector<double>& pressure, std::vector<double>& sw,
                                  double dt_days, double cfl, int max_substeps) {
  if (!(dt_days > 0.0)) throw ConfigError("transport step must be positive");
  const GridSpec& g = trans.grid;
  const std::size_t n = g.num_cells();
  const double vcell = g.cell_volume() / units::kFt3PerBbl;

  // Total fluxes and sandface rates stay frozen at the step-start saturation;
  // only the fractional flow is re-evaluated inside the sub-step loop.
  const FaceFluxes flux = face_fluxes(trans, relperm, fluid, pressure, sw);
  const auto wrates = well_layer_rates(wells, coefs, relperm, fluid, pressure, sw);

  std::vector<double> pv(n);
  for (std::size_t c = 0; c < n; ++c) pv[c] = poro.values[c] * vcell;

  std::vector<double> outflux(n, 0.0);
  auto add_face = [&](std::size_t l, std::size_t r, double f) {
    if (f >= 0.0)
      outflux[l] += f;
    else
      outflux[r] -= f;
  };
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i + 1 < g.nx; ++i)
        add_face(g.index(i, j, k), g.index(i + 1, j, k), flux.fx[trans.x_index(i, j, k)]);
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j + 1 < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        add_face(g.index(i, j, k), g.index(i, j + 1, k), flux.fy[trans.y_index(i, j, k)]);
  for (int k = 0; k + 1 < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        add_face(g.index(i, j, k), g.index(i, j, k + 1), flux.fz[trans.z_index(i, j, k)]);
  for (std::size_t w = 0; w < wells.size(); ++w)
    for (std::size_t l = 0; l < coefs[w].size(); ++l)
      if (wrates[w][l] > 0.0) outflux[coefs[w][l].cell] += wrates[w][l];

  const double max_df = relperm.max_fw_derivative(fluid.mu_w, fluid.mu_o);
  double dt_limit = dt_days;
  for (std::size_t c = 0; c < n; ++c)
    if (outflux[c] > 0.0) dt_limit = std::min(dt_limit, cfl * pv[c] / (outflux[c] * max_df));

  TransportTotals totals;
  totals.substeps = std::max(1, static_cast<int>(std::ceil(dt_days / dt_limit - 1e-12)));
  if (max_substeps > 0 && totals.substeps > max_substeps) {
    std::ostringstream ss;
    ss << "transport needs " << totals.substeps << " sub-steps, cap is " << max_substeps;
    throw SolverError(ss.str());
  }
  run_substeps(trans, pv, relperm, fluid, wells, coefs, flux, wrates, sw, dt_days, totals);
  return totals;
}

SimulationResult run_simulation(const ScalarField& perm, const ScalarField& poro,
                                const RelPermTable& relperm, const FluidModel& fluid,
                                const std::vector<WellSpec>& wells, const SimConfig& config) {
  const GridSpec& g = perm.grid;
  if (poro.grid != g) throw ConfigError("permeability and porosity grids differ");
  validate_wells(g, wells);
  for (double k : perm.values)
    if (!(k > 0.0)) throw ConfigError("permeability must be positive");
  for (double p : poro.values)
    if (!(p > 0.0) || p >= 1.0) throw ConfigError("porosity must lie in (0,1)");
  if (config.total_time_days <= 0.0 || config.step_days <= 0.0)
    throw ConfigError("simulation horizon and step must be positive");

  double sw0 = config.sw_init < 0.0 ? relperm.swc() : config.sw_init;
  if (sw0 < relperm.swc() - 1e-12 || sw0 > 1.0 - relperm.sor() + 1e-12)
    throw ConfigError("initial water saturation outside mobile range");

  SimulationResult result;
  result.grid = g;
  result.sw_init.assign(g.num_cells(), sw0);
  result.initial_water_in_place_stb = water_in_place_stb(poro, result.sw_init);

  const FaceTransmissibility trans = face_transmissibilities(perm);
  const auto coefs = well_layer_coefs(perm, wells);

  std::vector<double> sw = result.sw_init;
  Eigen::VectorXd prev_p;
  const int nsteps =
      std::max(1, static_cast<int>(std::ceil(config.total_time_days / config.step_days - 1e-9)));

  double t = 0.0;
  for (int k = 0; k < nsteps; ++k) {
    const double dt = std::min(config.step_days, config.total_time_days - t);
    std::vector<double> pressure;
    TransportTotals tt;
    try {
      const PressureSystem sys =
          assemble_pressure_system(trans, relperm, fluid, wells, coefs, sw, true);
      const Eigen::VectorXd p =
          solve_pressure(sys, config.pressure_tol, config.max_pressure_iters,
                         prev_p.size() ? &prev_p : nullptr);
      prev_p = p;
      pressure.assign(p.data(), p.data() + p.size());
      tt = update_saturation(trans, poro, relperm, fluid, wells, coefs, pressure, sw, dt,
                             config.cfl, config.max_substeps);
    } catch (const SolverError& e) {
      throw SolverError("step " + std::to_string(k + 1) + ": " + e.what());
    }
    result.injected_water_stb += tt.injected_water_stb;
    result.produced_water_stb += tt.produced_water_stb;
    result.produced_oil_stb += tt.produced_oil_stb;

    t += dt;
    StepRecord rec;
    rec.time_days = t;
    rec.pressure = pressure;
    rec.sw = sw;
    rec.rates = well_rates(perm, relperm, fluid, wells, pressure, sw);
    rec.substeps = tt.substeps;
    result.steps.push_back(std::move(rec));
  }

  result.final_water_in_place_stb = water_in_place_stb(poro, sw);
  return result;
}

PdeResidual pde_residual(const ScalarField& perm, const ScalarField& poro,
                         const RelPermTable& relperm, const FluidModel& fluid,
                         const std::vector<WellSpec>& wells, const SimulationResult& result) {
  const GridSpec& g = perm.grid;
  const std::size_t n = g.num_cells();
  const FaceTransmissibility trans = face_transmissibilities(perm);
  const auto coefs = well_layer_coefs(perm, wells);
  const double vcell = g.cell_volume() / units::kFt3PerBbl;
  std::vector<double> pv(n);
  for (std::size_t c = 0; c < n; ++c) pv[c] = poro.values[c] * vcell;

  PdeResidual res;
  double prev_t = 0.0;
  const std::vector<double>* prev_sw = &result.sw_init;
  for (const StepRecord& rec : result.steps) {
    const double dt = rec.time_days - prev_t;

    const PressureSystem sys =
        assemble_pressure_system(trans, relperm, fluid, wells, coefs, *prev_sw, false);
    const Eigen::Map<const Eigen::VectorXd> p(rec.pressure.data(),
                                              static_cast<Eigen::Index>(rec.pressure.size()));
    res.v_pressure += (sys.A * p - sys.b).squaredNorm();

    // Transport residual: replay the recorded number of upwind sub-steps from
    // the step-start state and express the terminal mismatch as a rate.
    const FaceFluxes flux = face_fluxes(trans, relperm, fluid, rec.pressure, *prev_sw);
    const auto wrates = well_layer_rates(wells, coefs, relperm, fluid, rec.pressure, *prev_sw);
    std::vector<double> replay = *prev_sw;
    TransportTotals tt;
    tt.substeps = std::max(1, rec.substeps);
    run_substeps(trans, pv, relperm, fluid, wells, coefs, flux, wrates, replay, dt, tt);
    for (std::size_t c = 0; c < n; ++c) {
      const double r = pv[c] * (rec.sw[c] - replay[c]) / dt;
      res.v_saturation += r * r;
    }

    prev_t = rec.time_days;
    prev_sw = &rec.sw;
  }

  const double denom = static_cast<double>(n) * static_cast<double>(result.steps.size());
  res.v_pressure /= denom;
  res.v_saturation /= denom;
  return res;
}

void write_rates_csv(const std::filesystem::path& path, const SimulationResult& result) {
  io::CsvTable table;
  table.header = {"time", "well", "oil_stb_d", "water_stb_d", "water_cut", "bhp_psia"};
  for (const StepRecord& rec : result.steps)
    for (const WellRates& r : rec.rates)
      table.rows.push_back({io::format_double(rec.time_days), r.well,
                            io::format_double(r.oil_stb_d), io::format_double(r.water_stb_d),
                            io::format_double(r.water_cut), io::format_double(r.bhp_psia)});
  io::write_csv(path, table);
}

}  // namespace reskit::sim
