#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "reskit/ccr/model.hpp"
#include "reskit/errors.hpp"
#include "reskit/io.hpp"
#include "reskit/rng.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace reskit;

namespace {

// two well-separated gaussian blobs in d dimensions
Eigen::MatrixXd two_blobs(int n_per, int d, testutil::TestRng& rng) {
  Eigen::MatrixXd x(2 * n_per, d);
  for (int t = 0; t < n_per; ++t)
    for (int c = 0; c < d; ++c) {
      x(t, c) = rng.uniform(-0.5, 0.5);
      x(n_per + t, c) = 10.0 + rng.uniform(-0.5, 0.5);
    }
  return x;
}

}  // namespace

TEST_CASE("kmeans: separates obvious blobs and is deterministic") {
  testutil::TestRng trng(2);
  const Eigen::MatrixXd pts = two_blobs(25, 3, trng);
  CounterRng rng = CounterRng::stream(11, 0);
  const auto res = ccr::kmeans(pts, 2, 5, 100, rng);
  REQUIRE(res.assign.size() == 50);

  for (int t = 1; t < 25; ++t) CHECK(res.assign[t] == res.assign[0]);
  for (int t = 26; t < 50; ++t) CHECK(res.assign[t] == res.assign[25]);
  CHECK(res.assign[0] != res.assign[25]);
  CHECK(res.sse < 50 * 3 * 0.25 + 1e-9);

  CounterRng rng2 = CounterRng::stream(11, 0);
  const auto res2 = ccr::kmeans(pts, 2, 5, 100, rng2);
  CHECK(res2.assign == res.assign);
  CHECK((res2.centers.array() == res.centers.array()).all());

  CounterRng rng3 = CounterRng::stream(11, 0);
  const auto one = ccr::kmeans(pts, 1, 1, 10, rng3);
  CHECK((one.centers.row(0).transpose() - pts.colwise().mean().transpose()).norm() < 1e-12);

  CounterRng rng4 = CounterRng::stream(11, 0);
  CHECK_THROWS_AS(ccr::kmeans(pts, 0, 1, 10, rng4), ConfigError);
  CHECK_THROWS_AS(ccr::kmeans(pts, 51, 1, 10, rng4), ConfigError);
}

TEST_CASE("expert features: quadratic expansion is the upper product triangle") {
  Eigen::VectorXd x(3);
  x << 2.0, 3.0, 5.0;
  const Eigen::VectorXd lin = ccr::expert_features(x, false);
  CHECK(lin.size() == 3);
  CHECK((lin.array() == x.array()).all());

  const Eigen::VectorXd quad = ccr::expert_features(x, true);
  REQUIRE(quad.size() == 9);  // d + d(d+1)/2
  CHECK((quad.head(3).array() == x.array()).all());
  Eigen::VectorXd tail(6);
  tail << 4.0, 6.0, 10.0, 9.0, 15.0, 25.0;  // x0x0,x0x1,x0x2,x1x1,x1x2,x2x2
  CHECK((quad.tail(6).array() == tail.array()).all());
}

TEST_CASE("single-expert ccr recovers a noiseless linear map") {
  testutil::TestRng rng(3);
  const int n = 120, d = 4;
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  Eigen::VectorXd w(d);
  w << 1.5, -2.0, 0.3, 4.0;
  for (int t = 0; t < n; ++t) {
    for (int c = 0; c < d; ++c) x(t, c) = rng.uniform(-2, 2);
    y[t] = x.row(t) * w + 0.7;
  }
  ccr::CcrConfig cfg;
  cfg.num_experts = 1;
  cfg.ridge_lambda = 1e-10;
  const ccr::CcrModel model = ccr::fit_ccr(x, y, cfg, 42);
  const Eigen::VectorXd pred = ccr::predict(model, x);
  CHECK((pred - y).cwiseAbs().maxCoeff() < 1e-6 * y.cwiseAbs().maxCoeff());
}

TEST_CASE("expert weights match the dense ridge oracle per cluster") {
  testutil::TestRng rng(7);
  const int n = 80, d = 2;
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (int t = 0; t < n; ++t) {
    const bool right = t >= n / 2;
    x(t, 0) = right ? rng.uniform(5, 6) : rng.uniform(-6, -5);
    x(t, 1) = rng.uniform(-1, 1);
    y[t] = right ? (2.0 * x(t, 0) - x(t, 1) + 3.0) : (-x(t, 0) + 4.0 * x(t, 1));
  }
  ccr::CcrConfig cfg;
  cfg.num_experts = 2;
  cfg.ridge_lambda = 1e-6;
  const ccr::CcrModel model = ccr::fit_ccr(x, y, cfg, 17);

  // reproduce the scaling, route every point, and refit each expert densely
  for (int e = 0; e < 2; ++e) {
    std::vector<int> members;
    Eigen::MatrixXd xs(n, d);
    for (int t = 0; t < n; ++t) {
      for (int c = 0; c < d; ++c)
        xs(t, c) = (x(t, c) - model.x_min[static_cast<std::size_t>(c)]) /
                   model.x_span[static_cast<std::size_t>(c)];
      if (ccr::gate_route(model, x.row(t).transpose()) == e) members.push_back(t);
    }
    if (members.size() < static_cast<std::size_t>(d) + 1) continue;
    Eigen::MatrixXd xe(members.size(), d);
    Eigen::VectorXd ye(members.size());
    for (std::size_t r = 0; r < members.size(); ++r) {
      xe.row(static_cast<Eigen::Index>(r)) = xs.row(members[r]);
      ye[static_cast<Eigen::Index>(r)] =
          (y[members[r]] - model.y_min) / model.y_span;
    }
    const auto fit = oracle::ridge(xe, ye, cfg.ridge_lambda);
    // same routing as training only if the gate agrees with kmeans; the
    // two linear regimes here are cleanly separable so it does
    CHECK((model.expert_w.row(e).transpose() - fit.w).norm() < 1e-6 * (1.0 + fit.w.norm()));
    CHECK(model.expert_b[e] == doctest::Approx(fit.b).epsilon(1e-6));
  }
}

TEST_CASE("step-function benchmark: ccr beats one global ridge by a wide margin") {
  testutil::TestRng rng(13);
  const int n_train = 300, n_test = 80;
  Eigen::MatrixXd xtr(n_train, 1), xte(n_test, 1);
  Eigen::VectorXd ytr(n_train), yte(n_test);
  auto f = [](double x) { return (x > 0.0 ? 1.0 : 0.0) + 0.1 * x; };
  for (int t = 0; t < n_train; ++t) {
    xtr(t, 0) = rng.uniform(-2, 2);
    ytr[t] = f(xtr(t, 0));
  }
  for (int t = 0; t < n_test; ++t) {
    xte(t, 0) = rng.uniform(-2, 2);
    yte[t] = f(xte(t, 0));
  }

  ccr::CcrConfig cfg;
  cfg.num_experts = 2;
  const ccr::CcrModel model = ccr::fit_ccr(xtr, ytr, cfg, 7);
  const Eigen::VectorXd pred = ccr::predict(model, xte);
  const double mse_ccr = (pred - yte).squaredNorm() / n_test;

  const auto base = oracle::ridge(xtr, ytr, 1e-6);
  const Eigen::VectorXd base_pred = (xte * base.w).array() + base.b;
  const double mse_ridge = (base_pred - yte).squaredNorm() / n_test;

  CHECK(mse_ccr < 0.1 * mse_ridge);
}

TEST_CASE("gate routes by regime on separable data") {
  testutil::TestRng rng(19);
  const int n = 100;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int t = 0; t < n; ++t) {
    x(t, 0) = (t < n / 2) ? rng.uniform(-3, -1) : rng.uniform(1, 3);
    y[t] = (t < n / 2) ? -5.0 : 5.0;
  }
  ccr::CcrConfig cfg;
  cfg.num_experts = 2;
  const ccr::CcrModel model = ccr::fit_ccr(x, y, cfg, 5);
  const int left = ccr::gate_route(model, Eigen::VectorXd::Constant(1, -2.0));
  const int right = ccr::gate_route(model, Eigen::VectorXd::Constant(1, 2.0));
  CHECK(left != right);
  CHECK(ccr::predict_one(model, Eigen::VectorXd::Constant(1, -2.0)) ==
        doctest::Approx(-5.0).epsilon(1e-3));
  CHECK(ccr::predict_one(model, Eigen::VectorXd::Constant(1, 2.0)) ==
        doctest::Approx(5.0).epsilon(1e-3));
}

TEST_CASE("degenerate inputs stay finite") {
  testutil::TestRng rng(23);
  const int n = 40;
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (int t = 0; t < n; ++t) {
    x(t, 0) = rng.uniform(-1, 1);
    x(t, 1) = 7.0;  // constant column
    x(t, 2) = rng.uniform(-1, 1);
    y[t] = x(t, 0) + x(t, 2);
  }
  ccr::CcrConfig cfg;
  cfg.num_experts = 3;
  const ccr::CcrModel model = ccr::fit_ccr(x, y, cfg, 3);
  const Eigen::VectorXd pred = ccr::predict(model, x);
  for (int t = 0; t < n; ++t) CHECK(std::isfinite(pred[t]));

  // constant labels
  const ccr::CcrModel flat = ccr::fit_ccr(x, Eigen::VectorXd::Constant(n, 2.5), cfg, 3);
  CHECK(ccr::predict_one(flat, x.row(0).transpose()) == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("tiny clusters fall back to a mean predictor without blowing up") {
  Eigen::MatrixXd x(7, 3);
  x << 0, 0, 0, 0.1, 0, 0, 0, 0.1, 0, 0.1, 0.1, 0, 0, 0, 0.1, 100, 100, 100, 0.05, 0.05, 0.05;
  Eigen::VectorXd y(7);
  y << 1, 1, 1, 1, 1, 50, 1;
  ccr::CcrConfig cfg;
  cfg.num_experts = 2;
  const ccr::CcrModel model = ccr::fit_ccr(x, y, cfg, 9);
  Eigen::VectorXd far(3);
  far << 100, 100, 100;
  CHECK(ccr::predict_one(model, far) == doctest::Approx(50.0).epsilon(1e-9));
}

TEST_CASE("fit rejects malformed problems") {
  ccr::CcrConfig cfg;
  cfg.num_experts = 5;
  Eigen::MatrixXd x(3, 2);
  x.setRandom();
  Eigen::VectorXd y(3);
  y.setZero();
  CHECK_THROWS_AS(ccr::fit_ccr(x, y, cfg, 1), ConfigError);  // n < num_experts
  Eigen::VectorXd y_bad(2);
  y_bad.setZero();
  cfg.num_experts = 1;
  CHECK_THROWS_AS(ccr::fit_ccr(x, y_bad, cfg, 1), ConfigError);
  CHECK_THROWS_AS(ccr::fit_ccr(Eigen::MatrixXd(0, 0), Eigen::VectorXd(0), cfg, 1),
                  ConfigError);
}

TEST_CASE("model file round trip is exact") {
  testutil::TestRng rng(29);
  const int n = 60;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int t = 0; t < n; ++t) {
    x(t, 0) = rng.uniform(-1, 1);
    x(t, 1) = rng.uniform(-1, 1);
    y[t] = std::sin(3.0 * x(t, 0)) + x(t, 1);
  }
  ccr::CcrConfig cfg;
  cfg.num_experts = 3;
  cfg.quadratic_features = true;
  const ccr::CcrModel model = ccr::fit_ccr(x, y, cfg, 31);

  const auto dir = testutil::temp_dir("ccr");
  ccr::save_ccr(dir / "m.ccr", model);
  const ccr::CcrModel back = ccr::load_ccr(dir / "m.ccr");
  CHECK(back.dim == model.dim);
  CHECK(back.num_experts == model.num_experts);
  CHECK(back.quadratic == model.quadratic);
  for (int t = 0; t < n; ++t)
    CHECK(ccr::predict_one(back, x.row(t).transpose()) ==
          ccr::predict_one(model, x.row(t).transpose()));

  io::write_text_file(dir / "bad.ccr", "not a model\n");
  CHECK_THROWS_AS(ccr::load_ccr(dir / "bad.ccr"), DataError);
  CHECK_THROWS_AS(ccr::load_ccr(dir / "missing.ccr"), DataError);

  Eigen::VectorXd wrong(3);
  wrong.setZero();
  CHECK_THROWS_AS(ccr::predict_one(model, wrong), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("training is deterministic in the seed") {
  testutil::TestRng rng(37);
  const int n = 50;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int t = 0; t < n; ++t) {
    x(t, 0) = rng.uniform(0, 1);
    x(t, 1) = rng.uniform(0, 1);
    y[t] = (x(t, 0) > 0.5 ? 2.0 : -2.0) + 0.1 * x(t, 1);
  }
  ccr::CcrConfig cfg;
  cfg.num_experts = 2;
  const ccr::CcrModel a = ccr::fit_ccr(x, y, cfg, 100);
  const ccr::CcrModel b = ccr::fit_ccr(x, y, cfg, 100);
  CHECK((a.gate_w.array() == b.gate_w.array()).all());
  CHECK((a.expert_w.array() == b.expert_w.array()).all());
  CHECK((a.gate_b.array() == b.gate_b.array()).all());
  CHECK((a.expert_b.array() == b.expert_b.array()).all());
}
