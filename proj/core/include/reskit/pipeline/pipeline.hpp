#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "reskit/inversion/areki.hpp"
#include "reskit/pipeline/config.hpp"

namespace reskit::pipeline {

inline constexpr const char* kCodeVersion = "reskit 0.1.0";

struct StageInfo {
  std::string status;  // "complete"
  double seconds = 0.0;
  std::vector<std::string> artifacts;
};

// Bookkeeping only: carries wall-clock timings, so it is the one output file
// that is not byte-reproducible across runs.
struct Manifest {
  std::string config_hash;
  std::string code_version;
  std::uint64_t seed = 0;
  std::map<std::string, StageInfo> stages;
};

Manifest load_manifest(const std::filesystem::path& out_dir);  // empty when absent
void save_manifest(const std::filesystem::path& out_dir, const Manifest& manifest);

struct CommandContext {
  PipelineConfig config;
  std::uint64_t config_hash = 0;
  int workers = 1;
};

// Stages in dependency order; each refuses to run before its upstream
// stages are marked complete and is byte-deterministic in (config, seed).
void cmd_gen_prior(const CommandContext& ctx);
void cmd_simulate(const CommandContext& ctx);
void cmd_train_ccr(const CommandContext& ctx);
void cmd_invert(const CommandContext& ctx);
void cmd_metrics(const CommandContext& ctx);
void cmd_plot_data(const CommandContext& ctx);

// Ensemble text format: header line, "dim J", then one row per member.
void write_ensemble(const std::filesystem::path& path, const Eigen::MatrixXd& members);
Eigen::MatrixXd read_ensemble(const std::filesystem::path& path);

void write_observations_csv(const std::filesystem::path& path, const eki::Observations& obs);
eki::Observations read_observations_csv(const std::filesystem::path& path);

}  // namespace reskit::pipeline
