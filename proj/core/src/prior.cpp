#include "reskit/prior/prior.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "reskit/errors.hpp"
#include "reskit/metrics/metrics.hpp"
#include "reskit/parallel.hpp"
#include "reskit/rng.hpp"

namespace reskit::prior {

namespace {
constexpr std::uint64_t kPriorTag = 0x7072696f72736d70ULL;
}

void validate(const GridSpec& grid, const PriorConfig& config) {
  if (config.kind != "lognormal" && config.kind != "bimodal")
    throw ConfigError("prior kind must be lognormal or bimodal");
  if (config.corr_x <= 0.0 || config.corr_y <= 0.0 || config.corr_z <= 0.0)
    throw ConfigError("correlation lengths must be positive");
  if (config.variance < 0.0) throw ConfigError("prior variance must be >= 0");
  if (config.kl_modes < 1) throw ConfigError("kl_modes must be >= 1");
  if (static_cast<std::size_t>(config.kl_modes) > grid.num_cells())
    throw ConfigError("kl_modes exceeds cell count");
  if (!(config.k_min > 0.0) || config.k_max <= config.k_min)
    throw ConfigError("permeability bounds must satisfy 0 < k_min < k_max");
  if (!(config.poro_min > 0.0) || config.poro_max <= config.poro_min || config.poro_max >= 1.0)
    throw ConfigError("porosity bounds must satisfy 0 < min < max < 1");
  if (config.threshold_quantile < 0.0 || config.threshold_quantile > 1.0)
    throw ConfigError("threshold quantile outside [0,1]");
}

Eigen::MatrixXd covariance_matrix(const GridSpec& grid, const PriorConfig& config) {
  const std::size_t n = grid.num_cells();
  Eigen::MatrixXd cov(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<std::array<int, 3>> cells(n);
  for (int k = 0; k < grid.nz; ++k)
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) cells[grid.index(i, j, k)] = {i, j, k};
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      const double di = (cells[a][0] - cells[b][0]) / config.corr_x;
      const double dj = (cells[a][1] - cells[b][1]) / config.corr_y;
      const double dk = (cells[a][2] - cells[b][2]) / config.corr_z;
      const double c = config.variance * std::exp(-0.5 * (di * di + dj * dj + dk * dk));
      cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = c;
      cov(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = c;
    }
  }
  return cov;
}

KlBasis kl_basis(const GridSpec& grid, const PriorConfig& config) {
  validate(grid, config);
  const Eigen::MatrixXd cov = covariance_matrix(grid, config);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw SolverError("kl basis: eigendecomposition failed");

  const Eigen::Index n = cov.rows();
  const int r = config.kl_modes;
  KlBasis basis;
  basis.modes.resize(n, r);
  basis.lambda.resize(r);
  for (int m = 0; m < r; ++m) {  // eigenvalues come back ascending
    const Eigen::Index src = n - 1 - m;
    double lam = eig.eigenvalues()[src];
    if (lam < 0.0) {
      lam = 0.0;
      ++basis.floored;
    }
    basis.lambda[m] = lam;
    basis.modes.col(m) = eig.eigenvectors().col(src);
  }
  const double trace = cov.trace();
  basis.captured_energy = trace > 0.0 ? basis.lambda.sum() / trace : 1.0;
  return basis;
}

PriorModel::PriorModel(const GridSpec& grid, const PriorConfig& config)
    : grid_(grid), config_(config), basis_(kl_basis(grid, config)) {
  if (basis_.floored > 0)
    warnings_.push_back("kl basis: " + std::to_string(basis_.floored) +
                        " negative eigenvalues floored at zero");
  if (basis_.captured_energy < config_.energy_warn)
    warnings_.push_back("kl basis captures " + std::to_string(basis_.captured_energy) +
                        " of the field variance, below the configured " +
                        std::to_string(config_.energy_warn));

  if (config_.kind == "lognormal") {
    meta_.assign(static_cast<std::size_t>(config_.kl_modes), ParamMeta{});
  } else {
    meta_.reserve(2 * grid_.num_cells());
    for (int block = 0; block < 2; ++block)
      for (int k = 0; k < grid_.nz; ++k)
        for (int j = 0; j < grid_.ny; ++j)
          for (int i = 0; i < grid_.nx; ++i) meta_.push_back(ParamMeta{true, i, j, k});
  }
}

int PriorModel::param_dim() const {
  return config_.kind == "lognormal" ? config_.kl_modes
                                     : static_cast<int>(2 * grid_.num_cells());
}

Eigen::VectorXd PriorModel::sample_member(std::uint64_t seed, int member) const {
  CounterRng rng = CounterRng::stream(seed, kPriorTag, static_cast<std::uint64_t>(member));
  Eigen::VectorXd theta(config_.kl_modes);
  for (int m = 0; m < config_.kl_modes; ++m) theta[m] = rng.next_normal();

  if (config_.kind == "lognormal") return theta;

  const Eigen::VectorXd z = basis_.modes * basis_.lambda.cwiseSqrt().cwiseProduct(theta);
  std::vector<double> sorted(z.data(), z.data() + z.size());
  const double thresh = metrics::percentile(std::move(sorted), 100.0 * config_.threshold_quantile);

  const std::size_t n = grid_.num_cells();
  Eigen::VectorXd u(2 * n);
  const double log_sand = std::log(config_.k_sand);
  const double log_shale = std::log(config_.k_shale);
  for (std::size_t c = 0; c < n; ++c) {
    const double logk = z[static_cast<Eigen::Index>(c)] >= thresh ? log_sand : log_shale;
    u[static_cast<Eigen::Index>(c)] = logk;
    u[static_cast<Eigen::Index>(n + c)] =
        std::clamp(config_.poro_a * logk + config_.poro_b, config_.poro_min, config_.poro_max);
  }
  return u;
}

PriorEnsemble PriorModel::sample(int num_members, std::uint64_t seed, int workers) const {
  if (num_members < 1) throw ConfigError("ensemble size must be >= 1");
  PriorEnsemble ens;
  ens.members.resize(param_dim(), num_members);
  parallel_for(static_cast<std::size_t>(num_members), workers, [&](std::size_t j) {
    ens.members.col(static_cast<Eigen::Index>(j)) = sample_member(seed, static_cast<int>(j));
  });
  ens.warnings = warnings_;
  return ens;
}

void PriorModel::decode(const Eigen::VectorXd& u, ScalarField& perm, ScalarField& poro) const {
  const std::size_t n = grid_.num_cells();
  if (u.size() != param_dim()) throw DataError("parameter vector length mismatch");
  perm = ScalarField(grid_);
  poro = ScalarField(grid_);
  const double lk_min = std::log(config_.k_min);
  const double lk_max = std::log(config_.k_max);

  if (config_.kind == "lognormal") {
    const Eigen::VectorXd z = basis_.modes * basis_.lambda.cwiseSqrt().cwiseProduct(u);
    for (std::size_t c = 0; c < n; ++c) {
      const double logk =
          std::clamp(config_.mean_log_k + z[static_cast<Eigen::Index>(c)], lk_min, lk_max);
      perm.values[c] = std::exp(logk);
      poro.values[c] =
          std::clamp(config_.poro_a * logk + config_.poro_b, config_.poro_min, config_.poro_max);
    }
    return;
  }

  for (std::size_t c = 0; c < n; ++c) {
    const double logk = std::clamp(u[static_cast<Eigen::Index>(c)], lk_min, lk_max);
    perm.values[c] = std::exp(logk);
    poro.values[c] = std::clamp(u[static_cast<Eigen::Index>(n + c)], config_.poro_min,
                                config_.poro_max);
  }
}

Eigen::VectorXd PriorModel::encode(const ScalarField& perm, const ScalarField& poro) const {
  const std::size_t n = grid_.num_cells();
  if (perm.grid != grid_ || poro.grid != grid_) throw DataError("encode: field grid mismatch");

  if (config_.kind == "lognormal") {
    Eigen::VectorXd dev(static_cast<Eigen::Index>(n));
    for (std::size_t c = 0; c < n; ++c)
      dev[static_cast<Eigen::Index>(c)] = std::log(perm.values[c]) - config_.mean_log_k;
    Eigen::VectorXd theta = basis_.modes.transpose() * dev;
    for (int m = 0; m < config_.kl_modes; ++m)
      theta[m] = basis_.lambda[m] > 0.0 ? theta[m] / std::sqrt(basis_.lambda[m]) : 0.0;
    return theta;
  }

  Eigen::VectorXd u(2 * n);
  for (std::size_t c = 0; c < n; ++c) {
    u[static_cast<Eigen::Index>(c)] = std::log(perm.values[c]);
    u[static_cast<Eigen::Index>(n + c)] = poro.values[c];
  }
  return u;
}

}  // namespace reskit::prior
