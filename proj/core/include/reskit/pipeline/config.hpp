#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "reskit/ccr/model.hpp"
#include "reskit/fluid.hpp"
#include "reskit/grid.hpp"
#include "reskit/inversion/areki.hpp"
#include "reskit/metrics/metrics.hpp"
#include "reskit/prior/prior.hpp"
#include "reskit/relperm.hpp"
#include "reskit/sim/simulator.hpp"
#include "reskit/wells.hpp"

namespace reskit::pipeline {

// Additive noise floors per observed quantity; the datum noise scale is
// rel * |value| + floor.
struct NoiseFloors {
  double oil = 1.0;        // STB/day
  double water = 1.0;      // STB/day
  double water_cut = 0.01;
  double bhp = 1.0;        // psi
};

struct InversionConfig {
  int max_iterations = 12;
  double noise_rel = 0.05;
  NoiseFloors noise_floors;
  double assimilation_fraction = 2.0 / 3.0;  // leading fraction of the horizon observed
  eki::LocalizationConfig localization;
  std::string forward = "fvm";  // "fvm" | "surrogate"
};

struct SurrogateTrainConfig {
  int training_runs = 30;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  int ensemble_size = 100;
  GridSpec grid;
  std::shared_ptr<const RelPermTable> relperm;
  FluidModel fluid;
  std::vector<WellSpec> wells;
  sim::SimConfig sim;
  prior::PriorConfig prior;
  ccr::CcrConfig ccr;
  SurrogateTrainConfig surrogate;
  InversionConfig inversion;
  metrics::SsimConfig ssim;
};

// Strict JSON loader: unknown keys are rejected, file paths resolve relative
// to the config file's directory.
PipelineConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace reskit::pipeline
