#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "reskit/ccr/model.hpp"
#include "reskit/fluid.hpp"
#include "reskit/relperm.hpp"
#include "reskit/sim/simulator.hpp"
#include "reskit/wells.hpp"

namespace reskit::surrogate {

// Per report step the surrogate sees, for each producer (sorted by name),
// its completion-averaged permeability, water and oil saturation, plus one
// global producer-and-layer-averaged pressure: 3*N_pr + 1 features. Labels
// are (oil, water) rates per producer: 2*N_pr channels.
struct FeatureSchema {
  std::vector<std::string> producers;

  int feature_dim() const { return static_cast<int>(3 * producers.size()) + 1; }
  int label_dim() const { return static_cast<int>(2 * producers.size()); }
  std::vector<std::string> feature_names() const;
  std::vector<std::string> channel_names() const;  // label channels, producer-major

  bool operator==(const FeatureSchema&) const = default;
};

FeatureSchema make_schema(const std::vector<WellSpec>& wells);

// Rows follow the recorded report steps; values are in physical units
// (CCR does its own scaling).
Eigen::MatrixXd build_features(const sim::SimulationResult& result, const ScalarField& perm,
                               const std::vector<WellSpec>& wells, const FeatureSchema& schema);

// (oil, water) per producer per step through the same sandface-rate code the
// simulator logs, so labels reproduce the rate log bit for bit. Producers
// must be BHP-controlled: rates are then a pure function of the fields.
Eigen::MatrixXd generate_labels(const sim::SimulationResult& result, const ScalarField& perm,
                                const RelPermTable& relperm, const FluidModel& fluid,
                                const std::vector<WellSpec>& wells, const FeatureSchema& schema);

struct RatesDataset {
  FeatureSchema schema;
  int num_runs = 0;
  int num_steps = 0;          // per run
  Eigen::MatrixXd features;   // (num_runs*num_steps) x feature_dim, run-major
  Eigen::MatrixXd labels;     // (num_runs*num_steps) x label_dim
};

void append_run(RatesDataset& dataset, const Eigen::MatrixXd& features,
                const Eigen::MatrixXd& labels);
void save_dataset_csv(const std::filesystem::path& path, const RatesDataset& dataset);
RatesDataset load_dataset_csv(const std::filesystem::path& path);

struct SurrogateBundle {
  FeatureSchema schema;
  std::vector<ccr::CcrModel> models;   // one per label channel
  std::vector<double> validation_mse;  // per channel, on the held-out runs
  int train_runs = 0;
  int validation_runs = 0;
};

// 90/10 train/validation split by run index (leading runs train).
SurrogateBundle train_surrogate(const RatesDataset& dataset, const ccr::CcrConfig& config,
                                std::uint64_t seed, int workers = 1);

// Channel-wise prediction with negative rates clamped to zero. The schema
// argument must equal the bundle's training schema.
Eigen::MatrixXd infer_rates(const SurrogateBundle& bundle, const FeatureSchema& schema,
                            const Eigen::MatrixXd& features);

// Directory layout: schema.txt plus one channel_NN.ccr per label channel.
void save_bundle(const std::filesystem::path& dir, const SurrogateBundle& bundle);
SurrogateBundle load_bundle(const std::filesystem::path& dir);

}  // namespace reskit::surrogate
