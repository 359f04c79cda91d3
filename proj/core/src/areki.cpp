#include "reskit/inversion/areki.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "reskit/errors.hpp"
#include "reskit/parallel.hpp"

namespace reskit::eki {

namespace {
constexpr std::uint64_t kEkiTag = 0x61726b6975706474ULL;
}

double data_misfit(const Eigen::VectorXd& y, const Eigen::VectorXd& g,
                   const Eigen::VectorXd& gamma_diag) {
  if (y.size() != g.size() || y.size() != gamma_diag.size())
    throw DataError("data misfit: size mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double r = y[i] - g[i];
    acc += r * r / gamma_diag[i];
  }
  return 0.5 * acc;
}

AlphaStep adaptive_alpha(const std::vector<double>& phis, int data_dim, double s_n) {
  if (phis.empty()) throw DataError("adaptive alpha: no misfits");
  if (s_n >= 1.0) throw DataError("adaptive alpha: regularization budget already spent");

  AlphaStep step;
  double mean = 0.0;
  for (double p : phis) mean += p;
  mean /= static_cast<double>(phis.size());
  double var = 0.0;
  if (phis.size() > 1) {
    for (double p : phis) var += (p - mean) * (p - mean);
    var /= static_cast<double>(phis.size() - 1);
  }
  step.phi_mean = mean;
  step.phi_var = var;

  if (*std::max_element(phis.begin(), phis.end()) <= 0.0) {
    step.exact_fit = true;
    step.s_next = s_n;
    return step;
  }

  const double inf = std::numeric_limits<double>::infinity();
  const double m = static_cast<double>(data_dim);
  const double cand_mean = mean > 0.0 ? m / (2.0 * mean) : inf;
  const double cand_var = var > 0.0 ? std::sqrt(m / (2.0 * var)) : inf;
  const double budget = 1.0 - s_n;
  const double raw = std::max(cand_mean, cand_var);
  if (raw >= budget) {
    step.alpha_inv = budget;
    step.s_next = 1.0;  // land exactly on the full budget
  } else {
    step.alpha_inv = raw;
    step.s_next = s_n + raw;
  }
  step.alpha = 1.0 / step.alpha_inv;
  return step;
}

double gaspari_cohn(double z_abs, double c) {
  if (z_abs < 0.0 || c <= 0.0) throw DataError("gaspari_cohn: need z >= 0, c > 0");
  const double r = z_abs / c;
  if (r >= 2.0) return 0.0;
  if (r <= 1.0) {
    return 1.0 + r * r * (-5.0 / 3.0 + r * (0.625 + r * (0.5 - 0.25 * r)));
  }
  return 4.0 - 5.0 * r + r * r * (5.0 / 3.0 + r * (0.625 + r * (-0.5 + r / 12.0))) -
         2.0 / (3.0 * r);
}

Eigen::MatrixXd build_taper(const std::vector<prior::ParamMeta>& params,
                            const std::vector<DatumMeta>& data, const LocalizationConfig& loc) {
  Eigen::MatrixXd taper(static_cast<Eigen::Index>(params.size()),
                        static_cast<Eigen::Index>(data.size()));
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t d = 0; d < data.size(); ++d) {
      double rho = 1.0;
      if (params[p].spatial) {
        const double di = params[p].i - data[d].i;
        const double dj = params[p].j - data[d].j;
        const double dk = params[p].k - data[d].k;
        rho = gaspari_cohn(std::sqrt(di * di + dj * dj + dk * dk), loc.radius_cells);
      }
      taper(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(d)) = rho;
    }
  }
  return taper;
}

void cross_covariances(const Eigen::MatrixXd& U, const Eigen::MatrixXd& G, Eigen::MatrixXd& c_ug,
                       Eigen::MatrixXd& c_gg) {
  const Eigen::Index J = U.cols();
  if (G.cols() != J || J < 2) throw DataError("cross covariances need matching J >= 2");
  const Eigen::MatrixXd Uc = U.colwise() - U.rowwise().mean();
  const Eigen::MatrixXd Gc = G.colwise() - G.rowwise().mean();
  const double norm = 1.0 / static_cast<double>(J - 1);
  c_ug = Uc * Gc.transpose() * norm;
  c_gg = Gc * Gc.transpose() * norm;
}

void eki_update(Eigen::MatrixXd& U, const Eigen::MatrixXd& G, const Observations& obs,
                double alpha, const Eigen::MatrixXd* taper, CounterRng& rng) {
  const Eigen::Index m = obs.y.size();
  const Eigen::Index J = U.cols();
  if (G.rows() != m || G.cols() != J) throw DataError("eki update: prediction shape mismatch");

  Eigen::MatrixXd c_ug, c_gg;
  cross_covariances(U, G, c_ug, c_gg);
  if (taper) {
    if (taper->rows() != c_ug.rows() || taper->cols() != c_ug.cols())
      throw DataError("eki update: taper shape mismatch");
    c_ug = taper->cwiseProduct(c_ug);
  }

  Eigen::MatrixXd A = c_gg;
  A.diagonal() += alpha * obs.gamma_diag;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success) {
    std::ostringstream ss;
    ss << "eki update: factorization of C_GG + alpha*Gamma failed (alpha=" << alpha
       << ", diag range [" << A.diagonal().minCoeff() << ", " << A.diagonal().maxCoeff() << "])";
    throw SolverError(ss.str());
  }

  const double root_alpha = std::sqrt(alpha);
  const Eigen::VectorXd noise_scale = obs.gamma_diag.cwiseSqrt();
  Eigen::MatrixXd rhs(m, J);
  for (Eigen::Index j = 0; j < J; ++j)
    for (Eigen::Index d = 0; d < m; ++d)
      rhs(d, j) = obs.y[d] + root_alpha * noise_scale[d] * rng.next_normal() - G(d, j);

  U += c_ug * ldlt.solve(rhs);
}

namespace {

// Concurrent forward sweep; failures abort with the lowest failing member.
Eigen::MatrixXd evaluate_forward(const Eigen::MatrixXd& U, const ForwardFn& forward,
                                 Eigen::Index m, int workers) {
  const Eigen::Index J = U.cols();
  Eigen::MatrixXd G(m, J);
  std::vector<std::string> failures(static_cast<std::size_t>(J));
  parallel_for(static_cast<std::size_t>(J), workers, [&](std::size_t j) {
    try {
      const Eigen::VectorXd g = forward(U.col(static_cast<Eigen::Index>(j)), static_cast<int>(j));
      if (g.size() != m) throw DataError("prediction length mismatch");
      G.col(static_cast<Eigen::Index>(j)) = g;
    } catch (const std::exception& e) {
      failures[j] = e.what();
    }
  });
  for (std::size_t j = 0; j < failures.size(); ++j)
    if (!failures[j].empty())
      throw SolverError("forward evaluation failed for member " + std::to_string(j) + ": " +
                        failures[j]);
  return G;
}

std::vector<double> misfits(const Eigen::MatrixXd& G, const Observations& obs) {
  std::vector<double> phis(static_cast<std::size_t>(G.cols()));
  for (Eigen::Index j = 0; j < G.cols(); ++j)
    phis[static_cast<std::size_t>(j)] = data_misfit(obs.y, G.col(j), obs.gamma_diag);
  return phis;
}

}  // namespace

InversionResult run_inversion(const Eigen::MatrixXd& prior_members,
                              const std::vector<prior::ParamMeta>& param_meta,
                              const Observations& obs, const ForwardFn& forward,
                              const ArekiConfig& config, std::uint64_t seed) {
  const Eigen::Index m = obs.y.size();
  if (m == 0) throw DataError("run inversion: no observations");
  if (obs.gamma_diag.size() != m || static_cast<Eigen::Index>(obs.meta.size()) != m)
    throw DataError("run inversion: observation metadata misaligned");
  if (static_cast<std::size_t>(prior_members.rows()) != param_meta.size())
    throw DataError("run inversion: parameter metadata misaligned");
  for (Eigen::Index d = 0; d < m; ++d)
    if (!(obs.gamma_diag[d] > 0.0)) throw DataError("run inversion: noise variance must be > 0");

  InversionResult result;
  result.posterior = prior_members;
  Eigen::MatrixXd& U = result.posterior;

  Eigen::MatrixXd taper;
  const bool use_taper = config.localization.enabled;
  if (use_taper) taper = build_taper(param_meta, obs.meta, config.localization);

  Eigen::MatrixXd G = evaluate_forward(U, forward, m, config.workers);
  result.initial_predictions = G;
  result.initial_phi = misfits(G, obs);

  ArekiState& state = result.state;
  state.stop = StopReason::MaxIterations;
  for (int n = 1; n <= config.max_iterations && state.s < 1.0; ++n) {
    const std::vector<double> phis = misfits(G, obs);
    const AlphaStep step = adaptive_alpha(phis, static_cast<int>(m), state.s);
    state.iterations.push_back({n, step.phi_mean, step.phi_var, step.alpha_inv, step.s_next});
    if (step.exact_fit) {
      state.stop = StopReason::ExactFit;
      break;
    }

    CounterRng rng = CounterRng::stream(seed, kEkiTag, static_cast<std::uint64_t>(n));
    eki_update(U, G, obs, step.alpha, use_taper ? &taper : nullptr, rng);
    G = evaluate_forward(U, forward, m, config.workers);

    state.s = step.s_next;
    if (state.s >= 1.0) state.stop = StopReason::BudgetComplete;
  }

  result.final_predictions = G;
  result.final_phi = misfits(G, obs);
  result.map_member = 0;
  for (std::size_t j = 1; j < result.final_phi.size(); ++j)
    if (result.final_phi[j] < result.final_phi[static_cast<std::size_t>(result.map_member)])
      result.map_member = static_cast<int>(j);
  result.mean_model = U.rowwise().mean();
  return result;
}

}  // namespace reskit::eki
