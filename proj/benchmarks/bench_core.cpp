#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <vector>

#include "reskit/inversion/areki.hpp"
#include "reskit/metrics/metrics.hpp"
#include "reskit/prior/prior.hpp"
#include "reskit/sim/simulator.hpp"
#include "reskit/transmissibility.hpp"

using namespace reskit;

namespace {

GridSpec bench_grid(int n) {
  GridSpec g;
  g.nx = n;
  g.ny = n;
  g.nz = 1;
  g.dx = 50.0;
  g.dy = 50.0;
  g.dz = 20.0;
  return g;
}

std::vector<WellSpec> bench_wells(int n) {
  WellSpec inj;
  inj.name = "I1";
  inj.kind = WellKind::Injector;
  inj.i = 0;
  inj.j = 0;
  inj.control = WellControl::Rate;
  inj.target = 400.0;
  WellSpec prd;
  prd.name = "P1";
  prd.kind = WellKind::Producer;
  prd.i = n - 1;
  prd.j = n - 1;
  prd.control = WellControl::Bhp;
  prd.target = 200.0;
  return {inj, prd};
}

ScalarField random_perm(const GridSpec& g, std::uint64_t seed) {
  ScalarField f(g, 0.0);
  CounterRng rng = CounterRng::stream(seed, 0);
  for (auto& v : f.values) v = 50.0 + 450.0 * rng.next_double();
  return f;
}

void bm_pressure_solve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const GridSpec g = bench_grid(n);
  const ScalarField perm = random_perm(g, 7);
  const auto table = RelPermTable::corey(0.2, 0.2, 1.0, 1.0, 2.0, 2.0, 101);
  const FluidModel fluid;
  const auto wells = bench_wells(n);
  const auto trans = face_transmissibilities(perm);
  const auto coefs = sim::well_layer_coefs(perm, wells);
  const std::vector<double> sw(g.num_cells(), 0.2);
  const auto sys = sim::assemble_pressure_system(trans, table, fluid, wells, coefs, sw);
  for (auto _ : state) {
    Eigen::VectorXd p = sim::solve_pressure(sys, 1e-9, 5000);
    benchmark::DoNotOptimize(p.data());
  }
}
BENCHMARK(bm_pressure_solve)->Arg(25)->Arg(50);

void bm_transport_step(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const GridSpec g = bench_grid(n);
  const ScalarField perm = random_perm(g, 7);
  const ScalarField poro(g, 0.2);
  const auto table = RelPermTable::corey(0.2, 0.2, 1.0, 1.0, 2.0, 2.0, 101);
  const FluidModel fluid;
  const auto wells = bench_wells(n);
  const auto trans = face_transmissibilities(perm);
  const auto coefs = sim::well_layer_coefs(perm, wells);
  const std::vector<double> sw(g.num_cells(), 0.2);
  const auto sys = sim::assemble_pressure_system(trans, table, fluid, wells, coefs, sw);
  const Eigen::VectorXd p = sim::solve_pressure(sys, 1e-9, 5000);
  const std::vector<double> pressure(p.data(), p.data() + p.size());
  for (auto _ : state) {
    std::vector<double> s = sw;
    auto totals =
        sim::update_saturation(trans, poro, table, fluid, wells, coefs, pressure, s, 50.0, 0.9);
    benchmark::DoNotOptimize(totals.substeps);
  }
}
BENCHMARK(bm_transport_step)->Arg(25)->Arg(50);

void bm_prior_sample(benchmark::State& state) {
  const GridSpec g = bench_grid(25);
  prior::PriorConfig cfg;
  cfg.kind = "bimodal";
  cfg.corr_x = 10.0;
  cfg.corr_y = 3.0;
  cfg.kl_modes = 60;
  const prior::PriorModel model(g, cfg);
  int member = 0;
  for (auto _ : state) {
    Eigen::VectorXd u = model.sample_member(42, member++);
    benchmark::DoNotOptimize(u.data());
  }
}
BENCHMARK(bm_prior_sample);

void bm_eki_update(benchmark::State& state) {
  const int dim = 1250, m = 104, J = 100;
  CounterRng rng = CounterRng::stream(5, 0);
  Eigen::MatrixXd u0(dim, J), g(m, J);
  for (int c = 0; c < J; ++c) {
    for (int r = 0; r < dim; ++r) u0(r, c) = rng.next_normal();
    for (int r = 0; r < m; ++r) g(r, c) = rng.next_normal();
  }
  eki::Observations obs;
  obs.y = Eigen::VectorXd::Ones(m);
  obs.gamma_diag = Eigen::VectorXd::Constant(m, 0.04);
  obs.meta.resize(m);
  for (auto _ : state) {
    Eigen::MatrixXd u = u0;
    CounterRng r = CounterRng::stream(6, 0);
    eki::eki_update(u, g, obs, 4.0, nullptr, r);
    benchmark::DoNotOptimize(u.data());
  }
}
BENCHMARK(bm_eki_update);

void bm_ssim(benchmark::State& state) {
  const GridSpec g = bench_grid(50);
  const ScalarField a = random_perm(g, 1);
  const ScalarField b = random_perm(g, 2);
  metrics::SsimConfig cfg;
  for (auto _ : state) {
    double s = metrics::ssim(a, b, cfg);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(bm_ssim);

void bm_gaspari_cohn_taper(benchmark::State& state) {
  std::vector<prior::ParamMeta> params(1250);
  for (int t = 0; t < 1250; ++t)
    params[static_cast<std::size_t>(t)] = {true, t % 25, (t / 25) % 25, 0};
  std::vector<eki::DatumMeta> data(104);
  for (int d = 0; d < 104; ++d) {
    data[static_cast<std::size_t>(d)].i = (3 * d) % 25;
    data[static_cast<std::size_t>(d)].j = (5 * d) % 25;
  }
  eki::LocalizationConfig loc;
  loc.enabled = true;
  loc.radius_cells = 8.0;
  for (auto _ : state) {
    Eigen::MatrixXd taper = eki::build_taper(params, data, loc);
    benchmark::DoNotOptimize(taper.data());
  }
}
BENCHMARK(bm_gaspari_cohn_taper);

}  // namespace

BENCHMARK_MAIN();
