#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "reskit/errors.hpp"
#include "reskit/io.hpp"
#include "reskit/pipeline/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int workers = 0;
};

void attach(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "pipeline config json")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed, "override the config seed");
  cmd->add_option("--workers", opts.workers, "worker threads (0 = hardware)");
  cmd->add_option("--out", opts.out_dir, "override the config output directory");
}

int run(const CommonOpts& opts, void (*fn)(const reskit::pipeline::CommandContext&)) {
  using namespace reskit;
  try {
    pipeline::PipelineConfig cfg = pipeline::load_config(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.out_dir) cfg.output_dir = *opts.out_dir;

    // Fingerprint covers the config bytes and the effective seed; worker count
    // and output location intentionally do not change it.
    const std::string text = io::read_text_file(opts.config_path);
    const std::uint64_t hash =
        pipeline::fnv1a64(text + "\nseed:" + std::to_string(cfg.seed));

    pipeline::CommandContext ctx;
    ctx.config = std::move(cfg);
    ctx.config_hash = hash;
    ctx.workers = opts.workers > 0
                      ? opts.workers
                      : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    fn(ctx);
    return 0;
  } catch (const ConfigError& e) {
    nlohmann::json err{{"error", "config"}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
  } catch (const SolverError& e) {
    nlohmann::json err{{"error", "solver"}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
  } catch (const DataError& e) {
    nlohmann::json err{{"error", "data"}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", "internal"}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reskit: reservoir simulation and ensemble history matching"};
  app.require_subcommand(1);

  struct Entry {
    const char* name;
    const char* help;
    void (*fn)(const reskit::pipeline::CommandContext&);
  };
  const Entry entries[] = {
      {"gen-prior", "sample the prior ensemble and the synthetic truth",
       reskit::pipeline::cmd_gen_prior},
      {"simulate", "run the truth model forward and record observations-to-be",
       reskit::pipeline::cmd_simulate},
      {"train-ccr", "build the rates dataset and train the cluster regression surrogate",
       reskit::pipeline::cmd_train_ccr},
      {"invert", "assimilate noisy rate data with adaptive-regularized ensemble updates",
       reskit::pipeline::cmd_invert},
      {"metrics", "score prior and posterior ensembles against the truth",
       reskit::pipeline::cmd_metrics},
      {"plot-data", "export plot-ready envelope, misfit and field csv files",
       reskit::pipeline::cmd_plot_data},
  };

  std::vector<std::pair<CommonOpts, const Entry*>> subs;
  subs.reserve(std::size(entries));
  for (const auto& e : entries) subs.emplace_back(CommonOpts{}, &e);

  int rc = 0;
  for (auto& [opts, entry] : subs) {
    CLI::App* cmd = app.add_subcommand(entry->name, entry->help);
    attach(cmd, opts);
    CLI::App* c = cmd;
    auto* o = &opts;
    auto* en = entry;
    c->callback([o, en, &rc] { rc = run(*o, en->fn); });
  }

  CLI11_PARSE(app, argc, argv);
  return rc;
}
