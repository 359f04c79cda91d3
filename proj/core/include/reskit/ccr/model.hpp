#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "reskit/rng.hpp"

namespace reskit::ccr {

// Cluster-classify-regress: k-means on the joint (scaled input, emphasized
// scaled label) space carves the data into regimes, a multinomial logistic
// gate learns the regime from inputs alone, and one ridge expert per regime
// fits the label. Prediction routes through the hard argmax of the gate.
struct CcrConfig {
  int num_experts = 3;
  bool quadratic_features = false;  // add pairwise products of scaled inputs
  double ridge_lambda = 1e-6;
  double gate_l2 = 1e-4;
  int gate_iters = 500;
  double gate_step = 1.0;
  int kmeans_restarts = 5;
  int kmeans_iters = 100;
  double cluster_label_weight = -1.0;  // < 0: use 10 * input_dim
};

struct CcrModel {
  int dim = 0;
  int num_experts = 0;
  bool quadratic = false;
  std::vector<double> x_min, x_span;  // span 1 for constant columns
  double y_min = 0.0, y_span = 1.0;
  Eigen::MatrixXd gate_w;    // num_experts x dim
  Eigen::VectorXd gate_b;    // num_experts
  Eigen::MatrixXd expert_w;  // num_experts x num_features
  Eigen::VectorXd expert_b;  // num_experts
};

struct KMeansResult {
  Eigen::MatrixXd centers;  // k x dim
  std::vector<int> assign;
  double sse = 0.0;
};

// k-means++ seeding plus Lloyd iterations; an emptied cluster is reseeded at
// the point farthest from its assigned center. Ties break to the lowest index,
// restarts keep the lowest-SSE run.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int restarts, int iters,
                    CounterRng& rng);

// Scaled inputs, optionally extended with pairwise products x_i*x_j, i <= j.
Eigen::VectorXd expert_features(const Eigen::VectorXd& x_scaled, bool quadratic);

CcrModel fit_ccr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const CcrConfig& config,
                 std::uint64_t seed);

int gate_route(const CcrModel& model, const Eigen::VectorXd& x);  // expert index
double predict_one(const CcrModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd predict(const CcrModel& model, const Eigen::MatrixXd& X);

void save_ccr(const std::filesystem::path& path, const CcrModel& model);
CcrModel load_ccr(const std::filesystem::path& path);

}  // namespace reskit::ccr
