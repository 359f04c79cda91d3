#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "reskit/grid.hpp"

namespace reskit::prior {

// Gaussian random field prior over log-permeability with a squared-exponential
// kernel, reduced by truncated Karhunen-Loeve expansion. Two parameterizations:
//   lognormal — the inversion state is the r KL coefficients;
//   bimodal   — the GRF is thresholded into two facies and the inversion state
//               is the flattened per-cell [log K | porosity] pair (length 2N).
struct PriorConfig {
  std::string kind = "bimodal";  // "lognormal" | "bimodal"
  double corr_x = 10.0;          // correlation lengths in cell units
  double corr_y = 10.0;
  double corr_z = 1.0;
  double variance = 1.0;
  int kl_modes = 50;
  double mean_log_k = 4.6051701859880914;  // ln(100)
  double k_sand = 1000.0;
  double k_shale = 20.0;
  double threshold_quantile = 0.7;  // sand where the field exceeds this quantile
  double poro_a = 0.0385;           // porosity = clamp(a * log K + b)
  double poro_b = 0.0346;
  double k_min = 1.0;
  double k_max = 5000.0;
  double poro_min = 0.05;
  double poro_max = 0.4;
  double energy_warn = 0.0;  // warn when captured variance fraction drops below
};

void validate(const GridSpec& grid, const PriorConfig& config);

// C(a,b) = variance * exp(-1/2 * sum((delta_cells / corr)^2))
Eigen::MatrixXd covariance_matrix(const GridSpec& grid, const PriorConfig& config);

struct KlBasis {
  Eigen::MatrixXd modes;   // N x r, orthonormal columns
  Eigen::VectorXd lambda;  // nonincreasing, negatives floored at 0
  double captured_energy = 1.0;  // sum(lambda) / trace of the kernel matrix
  int floored = 0;
};

KlBasis kl_basis(const GridSpec& grid, const PriorConfig& config);

// Localization metadata: spatial parameters carry their cell, global ones
// (KL coefficients) are never tapered.
struct ParamMeta {
  bool spatial = false;
  int i = 0, j = 0, k = 0;
};

struct PriorEnsemble {
  Eigen::MatrixXd members;  // dim x J
  std::vector<std::string> warnings;
};

class PriorModel {
 public:
  PriorModel(const GridSpec& grid, const PriorConfig& config);

  const GridSpec& grid() const { return grid_; }
  const PriorConfig& config() const { return config_; }
  const KlBasis& basis() const { return basis_; }
  int param_dim() const;
  const std::vector<ParamMeta>& param_meta() const { return meta_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Deterministic in (seed, member) regardless of call order.
  Eigen::VectorXd sample_member(std::uint64_t seed, int member) const;
  PriorEnsemble sample(int num_members, std::uint64_t seed, int workers = 1) const;

  // decode clamps K to [k_min, k_max] and porosity to its bounds; encode and
  // decode are exact inverses for in-bounds fields in the bimodal case.
  void decode(const Eigen::VectorXd& u, ScalarField& perm, ScalarField& poro) const;
  Eigen::VectorXd encode(const ScalarField& perm, const ScalarField& poro) const;

 private:
  GridSpec grid_;
  PriorConfig config_;
  KlBasis basis_;
  std::vector<ParamMeta> meta_;
  std::vector<std::string> warnings_;
};

}  // namespace reskit::prior
