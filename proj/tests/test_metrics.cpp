#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "reskit/errors.hpp"
#include "reskit/metrics/metrics.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace reskit;

TEST_CASE("normalized rmse by hand") {
  Eigen::VectorXd obs(2), sim(2), sigma(2);
  obs << 1.0, 2.0;
  sim << 2.0, 4.0;
  sigma << 1.0, 2.0;
  // residuals in sigma units: 1 and 1 -> sqrt(2/2) = 1
  CHECK(metrics::normalized_rmse(obs, sim, sigma, 2) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(metrics::normalized_rmse(obs, sim, sigma, 1) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(metrics::normalized_rmse(obs, obs, sigma, 2) == 0.0);

  Eigen::VectorXd bad_sigma(2);
  bad_sigma << 1.0, 0.0;
  CHECK_THROWS_AS(metrics::normalized_rmse(obs, sim, bad_sigma, 2), DataError);
  CHECK_THROWS_AS(metrics::normalized_rmse(obs, sim, sigma, 0), DataError);
  Eigen::VectorXd short_sim(1);
  short_sim << 1.0;
  CHECK_THROWS_AS(metrics::normalized_rmse(obs, short_sim, sigma, 2), DataError);
}

TEST_CASE("rmse scales inversely with sigma") {
  testutil::TestRng rng(5);
  const int m = 40;
  Eigen::VectorXd obs(m), sim(m), sigma(m);
  for (int t = 0; t < m; ++t) {
    obs[t] = rng.uniform(-5, 5);
    sim[t] = obs[t] + rng.uniform(-1, 1);
    sigma[t] = rng.uniform(0.5, 2.0);
  }
  const double r1 = metrics::normalized_rmse(obs, sim, sigma, 8);
  const double r2 = metrics::normalized_rmse(obs, sim, (2.0 * sigma).eval(), 8);
  CHECK(r2 == doctest::Approx(0.5 * r1).epsilon(1e-12));
}

TEST_CASE("percentile: type-7 interpolation") {
  std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(metrics::percentile(v, 0.0) == 1.0);
  CHECK(metrics::percentile(v, 100.0) == 10.0);
  CHECK(metrics::percentile(v, 25.0) == doctest::Approx(3.25).epsilon(1e-15));
  CHECK(metrics::percentile(v, 50.0) == doctest::Approx(5.5).epsilon(1e-15));
  CHECK(metrics::percentile(v, 90.0) == doctest::Approx(9.1).epsilon(1e-12));
  CHECK(metrics::percentile({42.0}, 37.0) == 42.0);
  CHECK_THROWS_AS(metrics::percentile({}, 50.0), DataError);
  CHECK_THROWS_AS(metrics::percentile(v, -1.0), DataError);
  CHECK_THROWS_AS(metrics::percentile(v, 101.0), DataError);

  testutil::TestRng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> data(static_cast<std::size_t>(2 + rng.below(40)));
    for (auto& d : data) d = rng.uniform(-10, 10);
    const double p = rng.uniform(0, 100);
    CHECK(metrics::percentile(data, p) ==
          doctest::Approx(oracle::percentile(data, p)).epsilon(1e-12));
  }
}

TEST_CASE("percentile curves per time index") {
  const std::vector<std::vector<double>> series{{1, 10}, {2, 20}, {3, 30}, {4, 40}};
  const auto curves = metrics::percentile_curves(series, {0.0, 50.0, 100.0});
  REQUIRE(curves.size() == 3);
  REQUIRE(curves[0].size() == 2);
  CHECK(curves[0][0] == 1.0);
  CHECK(curves[1][0] == doctest::Approx(2.5));
  CHECK(curves[2][1] == 40.0);

  CHECK_THROWS_AS(metrics::percentile_curves({{1.0, 2.0}}), DataError);
  CHECK_THROWS_AS(metrics::percentile_curves({{1.0, 2.0}, {1.0}}), DataError);
}

TEST_CASE("ssim: identical fields score 1") {
  testutil::TestRng rng(13);
  GridSpec g{12, 9, 1, 1, 1, 1, 0};
  ScalarField f(g);
  for (auto& v : f.values) v = rng.uniform(0, 100);
  CHECK(metrics::ssim(f, f) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(metrics::phi_ssim(f, f) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ssim matches the brute-force window oracle") {
  testutil::TestRng rng(29);
  for (int trial = 0; trial < 8; ++trial) {
    GridSpec g{8 + trial, 7 + trial / 2, 1, 1, 1, 1, 0};
    ScalarField a(g), b(g);
    for (auto& v : a.values) v = rng.uniform(0, 50);
    for (std::size_t c = 0; c < b.values.size(); ++c)
      b.values[c] = a.values[c] + rng.uniform(-5, 5);

    metrics::SsimConfig cfg;
    cfg.window = (trial % 2 == 0) ? 7 : 5;
    const double range = a.max() - a.min();
    const double c1 = (cfg.b1 * range) * (cfg.b1 * range);
    const double c2 = (cfg.b2 * range) * (cfg.b2 * range);
    const double expect =
        oracle::ssim_layer(a.values, b.values, g.nx, g.ny, cfg.window, c1, c2);
    CHECK(metrics::ssim(a, b, cfg) == doctest::Approx(expect).epsilon(1e-11));
  }
}

TEST_CASE("ssim: symmetry, bounds and degradation under noise") {
  testutil::TestRng rng(31);
  GridSpec g{16, 16, 1, 1, 1, 1, 0};
  ScalarField a(g), b(g), heavy(g);
  for (auto& v : a.values) v = rng.uniform(0, 1);
  for (std::size_t c = 0; c < a.values.size(); ++c) {
    b.values[c] = a.values[c] + 0.02 * rng.uniform(-1, 1);
    heavy.values[c] = a.values[c] + 0.8 * rng.uniform(-1, 1);
  }
  const double mild = metrics::ssim(a, b);
  const double rough = metrics::ssim(a, heavy);
  CHECK(mild <= 1.0 + 1e-12);
  CHECK(rough >= -1.0 - 1e-12);
  CHECK(mild > rough);

  // symmetric once the luminance scale is pinned instead of taken from the
  // reference image
  metrics::SsimConfig fixed;
  fixed.dynamic_range = 1.0;
  CHECK(metrics::ssim(a, b, fixed) == doctest::Approx(metrics::ssim(b, a, fixed)).epsilon(1e-12));
}

TEST_CASE("ssim: 3d fields average the per-layer scores") {
  testutil::TestRng rng(37);
  GridSpec g3{10, 10, 2, 1, 1, 1, 0};
  GridSpec g2{10, 10, 1, 1, 1, 1, 0};
  ScalarField a3(g3), b3(g3);
  for (auto& v : a3.values) v = rng.uniform(0, 10);
  for (std::size_t c = 0; c < b3.values.size(); ++c)
    b3.values[c] = a3.values[c] + rng.uniform(-1, 1);

  metrics::SsimConfig cfg;
  cfg.dynamic_range = 10.0;  // decouple layers from per-layer auto range
  double acc = 0.0;
  for (int k = 0; k < 2; ++k) {
    ScalarField a2(g2), b2(g2);
    for (int j = 0; j < 10; ++j)
      for (int i = 0; i < 10; ++i) {
        a2.at(i, j, 0) = a3.at(i, j, k);
        b2.at(i, j, 0) = b3.at(i, j, k);
      }
    acc += metrics::ssim(a2, b2, cfg);
  }
  CHECK(metrics::ssim(a3, b3, cfg) == doctest::Approx(acc / 2.0).epsilon(1e-12));
}

TEST_CASE("ssim config validation") {
  GridSpec g{8, 8, 1, 1, 1, 1, 0};
  ScalarField a(g), b(g);
  metrics::SsimConfig cfg;
  cfg.window = 4;
  CHECK_THROWS_AS(metrics::ssim(a, b, cfg), ConfigError);
  cfg.window = 1;
  CHECK_THROWS_AS(metrics::ssim(a, b, cfg), ConfigError);

  ScalarField wrong(GridSpec{7, 8, 1, 1, 1, 1, 0});
  CHECK_THROWS_AS(metrics::ssim(a, wrong), DataError);

  // constant reference: auto range degenerates, the guard keeps ssim finite
  ScalarField flat_a = testutil::constant_field(g, 3.0);
  ScalarField flat_b = testutil::constant_field(g, 3.0);
  CHECK(metrics::ssim(flat_a, flat_b) == doctest::Approx(1.0).epsilon(1e-12));
}
