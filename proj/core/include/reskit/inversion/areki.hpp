#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "reskit/prior/prior.hpp"
#include "reskit/rng.hpp"

namespace reskit::eki {

struct DatumMeta {
  std::string well;
  double time_days = 0.0;
  std::string quantity;  // oil | water | water_cut | bhp
  int i = 0, j = 0, k = 0;  // well cell, for localization distance
};

struct Observations {
  Eigen::VectorXd y;
  Eigen::VectorXd gamma_diag;  // noise variances, one per datum
  std::vector<DatumMeta> meta;
  int num_time_steps = 0;
};

struct LocalizationConfig {
  bool enabled = false;
  double radius_cells = 10.0;  // Gaspari-Cohn support parameter c
};

struct ArekiConfig {
  int max_iterations = 12;
  LocalizationConfig localization;
  int workers = 1;
};

// Phi = 1/2 sum((y - g)^2 / gamma)
double data_misfit(const Eigen::VectorXd& y, const Eigen::VectorXd& g,
                   const Eigen::VectorXd& gamma_diag);

// One regularization step: 1/alpha = min(max(m/(2*mean), sqrt(m/(2*var))), 1 - s),
// with the clamped branch landing s exactly on 1.
struct AlphaStep {
  double phi_mean = 0.0;
  double phi_var = 0.0;  // sample variance, J-1 denominator
  double alpha_inv = 0.0;
  double alpha = 0.0;
  double s_next = 0.0;
  bool exact_fit = false;  // all misfits zero; no further update possible
};

AlphaStep adaptive_alpha(const std::vector<double>& phis, int data_dim, double s_n);

// Fifth-order piecewise-rational compactly supported correlation,
// 1 at the origin, 0 at and beyond 2c.
double gaspari_cohn(double z_abs, double c);

// Hadamard taper for the parameter-data covariance; rows follow params,
// columns follow data. Non-spatial parameters are left untapered.
Eigen::MatrixXd build_taper(const std::vector<prior::ParamMeta>& params,
                            const std::vector<DatumMeta>& data, const LocalizationConfig& loc);

// Sample cross-covariances about the ensemble means, 1/(J-1) normalization.
// U is dim x J, G is m x J.
void cross_covariances(const Eigen::MatrixXd& U, const Eigen::MatrixXd& G, Eigen::MatrixXd& c_ug,
                       Eigen::MatrixXd& c_gg);

// In-place ensemble update with perturbed observations y + sqrt(alpha)*xi,
// xi ~ N(0, Gamma) drawn per member. taper may be null.
void eki_update(Eigen::MatrixXd& U, const Eigen::MatrixXd& G, const Observations& obs,
                double alpha, const Eigen::MatrixXd* taper, CounterRng& rng);

enum class StopReason { BudgetComplete, MaxIterations, ExactFit };

struct IterationStat {
  int n = 0;
  double phi_mean = 0.0;
  double phi_var = 0.0;
  double alpha_inv = 0.0;
  double s_after = 0.0;
};

struct ArekiState {
  std::vector<IterationStat> iterations;
  double s = 0.0;
  StopReason stop = StopReason::MaxIterations;
};

struct InversionResult {
  Eigen::MatrixXd posterior;            // dim x J
  ArekiState state;
  Eigen::MatrixXd initial_predictions;  // m x J, prior forward sweep
  Eigen::MatrixXd final_predictions;    // m x J
  std::vector<double> initial_phi;
  std::vector<double> final_phi;
  int map_member = 0;          // lowest final misfit
  Eigen::VectorXd mean_model;  // posterior ensemble mean
};

// forward(u, member) returns the predicted data vector for one parameter
// vector; evaluations run concurrently but the result is identical for any
// worker count.
using ForwardFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, int)>;

InversionResult run_inversion(const Eigen::MatrixXd& prior_members,
                              const std::vector<prior::ParamMeta>& param_meta,
                              const Observations& obs, const ForwardFn& forward,
                              const ArekiConfig& config, std::uint64_t seed);

}  // namespace reskit::eki
