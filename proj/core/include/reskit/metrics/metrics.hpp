#pragma once

#include <Eigen/Dense>
#include <vector>

#include "reskit/grid.hpp"

namespace reskit::metrics {

// Noise-normalized data misfit: sqrt( (1/N) Σ_k Σ_j ((obs - sim)/σ)² ) where
// N counts assimilation time steps, not individual data.
double normalized_rmse(const Eigen::VectorXd& obs, const Eigen::VectorXd& sim,
                       const Eigen::VectorXd& sigma, int num_time_steps);

struct SsimConfig {
  int window = 7;              // odd, >= 3
  double b1 = 0.01;
  double b2 = 0.03;
  double dynamic_range = -1.0;  // <= 0: use max-min of the reference layer
};

// Mean local structural similarity over a uniform sliding window with
// symmetric (edge-inclusive) reflection padding. 3D fields are scored
// layer by layer and averaged.
double ssim(const ScalarField& ref, const ScalarField& img, const SsimConfig& config = {});
double phi_ssim(const ScalarField& ref, const ScalarField& img, const SsimConfig& config = {});

// Empirical percentile with linear interpolation between order statistics
// (the common "type 7" rule); p in [0, 100].
double percentile(std::vector<double> values, double p);

// member_series: one series per ensemble member, equal lengths. Returns one
// curve per requested percentile, evaluated independently at each time index.
std::vector<std::vector<double>> percentile_curves(
    const std::vector<std::vector<double>>& member_series,
    const std::vector<double>& ps = {10.0, 50.0, 90.0});

}  // namespace reskit::metrics
