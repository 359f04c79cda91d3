#include "reskit/pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "reskit/errors.hpp"
#include "reskit/io.hpp"
#include "reskit/metrics/metrics.hpp"
#include "reskit/parallel.hpp"
#include "reskit/surrogate/surrogate.hpp"

namespace reskit::pipeline {

namespace {

using nlohmann::json;

constexpr std::uint64_t kObsNoiseTag = 0x6f62736e6f697365ULL;
constexpr int kTrainingMemberOffset = 1000000;  // keeps training runs off ensemble streams
constexpr int kTruthMember = -1;
constexpr int kSampleFieldsWritten = 4;

std::string hex_hash(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

Manifest load_checked_manifest(const CommandContext& ctx) {
  Manifest m = load_manifest(ctx.config.output_dir);
  const std::string hash = hex_hash(ctx.config_hash);
  if (!m.stages.empty() && m.config_hash != hash)
    throw ConfigError("output directory " + ctx.config.output_dir.string() +
                      " was produced with a different config (manifest hash mismatch)");
  m.config_hash = hash;
  m.code_version = kCodeVersion;
  m.seed = ctx.config.seed;
  return m;
}

void require_stages(const Manifest& m, std::initializer_list<const char*> stages) {
  for (const char* s : stages) {
    const auto it = m.stages.find(s);
    if (it == m.stages.end() || it->second.status != "complete")
      throw DataError(std::string("stage '") + s + "' has not completed in this output directory");
  }
}

void finish_stage(const CommandContext& ctx, Manifest& m, const std::string& stage,
                  const StageTimer& timer, std::vector<std::string> artifacts) {
  StageInfo info;
  info.status = "complete";
  info.seconds = timer.seconds();
  info.artifacts = std::move(artifacts);
  m.stages[stage] = std::move(info);
  save_manifest(ctx.config.output_dir, m);
}

// Observation layout: per assimilated report step, producers (sorted) each
// contribute oil, water and water cut, then injectors (sorted) contribute BHP.
struct ObsLayout {
  std::vector<std::string> producers;
  std::vector<std::string> injectors;
  std::vector<double> times;  // assimilated report times

  int per_step() const { return static_cast<int>(3 * producers.size() + injectors.size()); }
  int steps() const { return static_cast<int>(times.size()); }
  int dim() const { return steps() * per_step(); }
};

std::vector<double> report_times(const sim::SimConfig& cfg) {
  const int nsteps =
      std::max(1, static_cast<int>(std::ceil(cfg.total_time_days / cfg.step_days - 1e-9)));
  std::vector<double> times;
  double t = 0.0;
  for (int k = 0; k < nsteps; ++k) {
    t += std::min(cfg.step_days, cfg.total_time_days - t);
    times.push_back(t);
  }
  return times;
}

ObsLayout make_layout(const PipelineConfig& cfg) {
  ObsLayout lo;
  for (const auto& w : cfg.wells)
    (w.kind == WellKind::Producer ? lo.producers : lo.injectors).push_back(w.name);
  std::sort(lo.producers.begin(), lo.producers.end());
  std::sort(lo.injectors.begin(), lo.injectors.end());
  if (lo.producers.empty()) throw ConfigError("inversion needs at least one producer");

  const double cutoff = cfg.inversion.assimilation_fraction * cfg.sim.total_time_days + 1e-9;
  for (double t : report_times(cfg.sim))
    if (t <= cutoff) lo.times.push_back(t);
  if (lo.times.empty())
    throw ConfigError("assimilation window shorter than the first report step");
  return lo;
}

const WellSpec& well_by_name(const PipelineConfig& cfg, const std::string& name) {
  for (const auto& w : cfg.wells)
    if (w.name == name) return w;
  throw DataError("well not found: " + name);
}

std::vector<eki::DatumMeta> build_meta(const PipelineConfig& cfg, const ObsLayout& lo) {
  std::vector<eki::DatumMeta> meta;
  meta.reserve(static_cast<std::size_t>(lo.dim()));
  for (double t : lo.times) {
    for (const auto& name : lo.producers) {
      const WellSpec& w = well_by_name(cfg, name);
      for (const char* q : {"oil", "water", "water_cut"})
        meta.push_back({name, t, q, w.i, w.j, w.k0});
    }
    for (const auto& name : lo.injectors) {
      const WellSpec& w = well_by_name(cfg, name);
      meta.push_back({name, t, "bhp", w.i, w.j, w.k0});
    }
  }
  return meta;
}

double noise_floor(const NoiseFloors& f, const std::string& quantity) {
  if (quantity == "oil") return f.oil;
  if (quantity == "water") return f.water;
  if (quantity == "water_cut") return f.water_cut;
  if (quantity == "bhp") return f.bhp;
  throw DataError("unknown observed quantity: " + quantity);
}

Eigen::VectorXd extract_predictions(const sim::SimulationResult& result, const ObsLayout& lo) {
  if (result.steps.size() < static_cast<std::size_t>(lo.steps()))
    throw DataError("simulation recorded fewer steps than the observation layout needs");
  Eigen::VectorXd out(lo.dim());
  Eigen::Index pos = 0;
  for (int s = 0; s < lo.steps(); ++s) {
    const auto& rates = result.steps[static_cast<std::size_t>(s)].rates;
    auto find = [&rates](const std::string& name) -> const WellRates& {
      for (const auto& r : rates)
        if (r.well == name) return r;
      throw DataError("rate record missing well " + name);
    };
    for (const auto& name : lo.producers) {
      const WellRates& r = find(name);
      out[pos++] = r.oil_stb_d;
      out[pos++] = r.water_stb_d;
      out[pos++] = r.water_cut;
    }
    for (const auto& name : lo.injectors) out[pos++] = find(name).bhp_psia;
  }
  return out;
}

// The inversion forward only simulates the assimilated window.
sim::SimConfig window_sim_config(const PipelineConfig& cfg, const ObsLayout& lo) {
  sim::SimConfig w = cfg.sim;
  w.total_time_days = lo.times.back();
  return w;
}

Eigen::VectorXd truth_data_from_rates(const io::CsvTable& table, const ObsLayout& lo) {
  const int c_time = table.column("time"), c_well = table.column("well");
  const int c_oil = table.column("oil_stb_d"), c_water = table.column("water_stb_d");
  const int c_wc = table.column("water_cut"), c_bhp = table.column("bhp_psia");
  if (c_time < 0 || c_well < 0 || c_oil < 0 || c_water < 0 || c_wc < 0 || c_bhp < 0)
    throw DataError("rates csv is missing required columns");

  std::map<std::pair<std::string, std::string>, const std::vector<std::string>*> rows;
  std::vector<std::string> time_order;
  for (const auto& row : table.rows) {
    if (time_order.empty() || time_order.back() != row[c_time])
      if (std::find(time_order.begin(), time_order.end(), row[c_time]) == time_order.end())
        time_order.push_back(row[c_time]);
    rows[{row[c_time], row[c_well]}] = &row;
  }
  if (static_cast<int>(time_order.size()) < lo.steps())
    throw DataError("rates csv has fewer report steps than the assimilation window");

  Eigen::VectorXd d(lo.dim());
  Eigen::Index pos = 0;
  for (int s = 0; s < lo.steps(); ++s) {
    const std::string& t = time_order[static_cast<std::size_t>(s)];
    auto fetch = [&](const std::string& well) -> const std::vector<std::string>& {
      const auto it = rows.find({t, well});
      if (it == rows.end()) throw DataError("rates csv missing well " + well + " at t=" + t);
      return *it->second;
    };
    for (const auto& name : lo.producers) {
      const auto& row = fetch(name);
      d[pos++] = std::stod(row[c_oil]);
      d[pos++] = std::stod(row[c_water]);
      d[pos++] = std::stod(row[c_wc]);
    }
    for (const auto& name : lo.injectors) d[pos++] = std::stod(fetch(name)[c_bhp]);
  }
  return d;
}

void write_member_fields(const std::filesystem::path& dir, const std::string& prefix,
                         const prior::PriorModel& model, const Eigen::VectorXd& u,
                         std::vector<std::string>* artifacts) {
  ScalarField perm, poro;
  model.decode(u, perm, poro);
  write_field(dir / (prefix + "_perm.txt"), perm);
  write_field(dir / (prefix + "_poro.txt"), poro);
  if (artifacts) {
    artifacts->push_back((dir / (prefix + "_perm.txt")).string());
    artifacts->push_back((dir / (prefix + "_poro.txt")).string());
  }
}

void write_predictions_csv(const std::filesystem::path& path, const eki::Observations& obs,
                           const Eigen::MatrixXd& predictions) {
  io::CsvTable table;
  table.header = {"time", "well", "quantity", "observed", "sigma"};
  char col[32];
  for (Eigen::Index j = 0; j < predictions.cols(); ++j) {
    std::snprintf(col, sizeof(col), "m%04lld", static_cast<long long>(j));
    table.header.push_back(col);
  }
  for (Eigen::Index d = 0; d < predictions.rows(); ++d) {
    const auto& m = obs.meta[static_cast<std::size_t>(d)];
    std::vector<std::string> row = {io::format_double(m.time_days), m.well, m.quantity,
                                    io::format_double(obs.y[d]),
                                    io::format_double(std::sqrt(obs.gamma_diag[d]))};
    for (Eigen::Index j = 0; j < predictions.cols(); ++j)
      row.push_back(io::format_double(predictions(d, j)));
    table.rows.push_back(std::move(row));
  }
  io::write_csv(path, table);
}

Eigen::MatrixXd read_predictions_csv(const std::filesystem::path& path) {
  const io::CsvTable table = io::read_csv(path);
  if (table.header.size() < 6) throw DataError("predictions csv too narrow: " + path.string());
  const Eigen::Index J = static_cast<Eigen::Index>(table.header.size()) - 5;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(table.rows.size()), J);
  for (Eigen::Index d = 0; d < out.rows(); ++d)
    for (Eigen::Index j = 0; j < J; ++j)
      out(d, j) = std::stod(table.rows[static_cast<std::size_t>(d)][static_cast<std::size_t>(5 + j)]);
  return out;
}

std::string stop_reason_name(eki::StopReason reason) {
  switch (reason) {
    case eki::StopReason::BudgetComplete: return "budget_complete";
    case eki::StopReason::MaxIterations: return "max_iterations";
    case eki::StopReason::ExactFit: return "exact_fit";
  }
  return "unknown";
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& out_dir) {
  Manifest m;
  const auto path = out_dir / "manifest.json";
  if (!std::filesystem::exists(path)) return m;
  json root;
  try {
    root = json::parse(io::read_text_file(path));
    m.config_hash = root.value("config_hash", "");
    m.code_version = root.value("code_version", "");
    m.seed = root.value("seed", 0ULL);
    if (root.contains("stages")) {
      for (const auto& item : root.at("stages").items()) {
        StageInfo info;
        info.status = item.value().value("status", "");
        info.seconds = item.value().value("seconds", 0.0);
        if (item.value().contains("artifacts"))
          for (const auto& a : item.value().at("artifacts"))
            info.artifacts.push_back(a.get<std::string>());
        m.stages[item.key()] = std::move(info);
      }
    }
  } catch (const json::exception& e) {
    throw DataError("manifest " + path.string() + " is corrupt: " + e.what());
  }
  return m;
}

void save_manifest(const std::filesystem::path& out_dir, const Manifest& manifest) {
  json root;
  root["config_hash"] = manifest.config_hash;
  root["code_version"] = manifest.code_version;
  root["seed"] = manifest.seed;
  json stages = json::object();
  for (const auto& [name, info] : manifest.stages) {
    json s;
    s["status"] = info.status;
    s["seconds"] = info.seconds;
    s["artifacts"] = info.artifacts;
    stages[name] = std::move(s);
  }
  root["stages"] = std::move(stages);
  io::write_text_file(out_dir / "manifest.json", root.dump(2) + "\n");
}

void write_ensemble(const std::filesystem::path& path, const Eigen::MatrixXd& members) {
  std::ostringstream ss;
  ss << "reskit-ensemble v1\n" << members.rows() << ' ' << members.cols() << '\n';
  for (Eigen::Index j = 0; j < members.cols(); ++j) {
    for (Eigen::Index d = 0; d < members.rows(); ++d) {
      if (d) ss << ' ';
      ss << io::format_double(members(d, j));
    }
    ss << '\n';
  }
  io::write_text_file(path, ss.str());
}

Eigen::MatrixXd read_ensemble(const std::filesystem::path& path) {
  std::istringstream in(io::read_text_file(path));
  std::string magic, version;
  in >> magic >> version;
  if (magic != "reskit-ensemble" || version != "v1")
    throw DataError("not an ensemble file: " + path.string());
  Eigen::Index dim = 0, J = 0;
  in >> dim >> J;
  if (!in || dim < 1 || J < 1) throw DataError("ensemble header corrupt: " + path.string());
  Eigen::MatrixXd members(dim, J);
  for (Eigen::Index j = 0; j < J; ++j)
    for (Eigen::Index d = 0; d < dim; ++d) in >> members(d, j);
  if (!in) throw DataError("ensemble file truncated: " + path.string());
  return members;
}

void write_observations_csv(const std::filesystem::path& path, const eki::Observations& obs) {
  io::CsvTable table;
  table.header = {"time", "well", "quantity", "value", "sigma", "i", "j", "k"};
  for (Eigen::Index d = 0; d < obs.y.size(); ++d) {
    const auto& m = obs.meta[static_cast<std::size_t>(d)];
    table.rows.push_back({io::format_double(m.time_days), m.well, m.quantity,
                          io::format_double(obs.y[d]),
                          io::format_double(std::sqrt(obs.gamma_diag[d])), std::to_string(m.i),
                          std::to_string(m.j), std::to_string(m.k)});
  }
  io::write_csv(path, table);
}

eki::Observations read_observations_csv(const std::filesystem::path& path) {
  const io::CsvTable table = io::read_csv(path);
  eki::Observations obs;
  const Eigen::Index m = static_cast<Eigen::Index>(table.rows.size());
  obs.y.resize(m);
  obs.gamma_diag.resize(m);
  std::string last_time;
  for (Eigen::Index d = 0; d < m; ++d) {
    const auto& row = table.rows[static_cast<std::size_t>(d)];
    eki::DatumMeta meta;
    meta.time_days = std::stod(row[0]);
    meta.well = row[1];
    meta.quantity = row[2];
    obs.y[d] = std::stod(row[3]);
    const double sigma = std::stod(row[4]);
    obs.gamma_diag[d] = sigma * sigma;
    meta.i = std::stoi(row[5]);
    meta.j = std::stoi(row[6]);
    meta.k = std::stoi(row[7]);
    obs.meta.push_back(std::move(meta));
    if (row[0] != last_time) {
      ++obs.num_time_steps;
      last_time = row[0];
    }
  }
  return obs;
}

void cmd_gen_prior(const CommandContext& ctx) {
  const PipelineConfig& cfg = ctx.config;
  Manifest manifest = load_checked_manifest(ctx);
  StageTimer timer;

  const prior::PriorModel model(cfg.grid, cfg.prior);
  for (const auto& w : model.warnings()) std::cerr << "warning: " << w << '\n';

  const prior::PriorEnsemble ens = model.sample(cfg.ensemble_size, cfg.seed, ctx.workers);
  const auto prior_dir = cfg.output_dir / "prior";
  const auto truth_dir = cfg.output_dir / "truth";
  std::vector<std::string> artifacts;

  write_ensemble(prior_dir / "ensemble.txt", ens.members);
  artifacts.push_back((prior_dir / "ensemble.txt").string());

  char prefix[32];
  for (int j = 0; j < std::min(cfg.ensemble_size, kSampleFieldsWritten); ++j) {
    std::snprintf(prefix, sizeof(prefix), "member_%04d", j);
    write_member_fields(prior_dir, prefix, model, ens.members.col(j), &artifacts);
  }

  const Eigen::VectorXd truth = model.sample_member(cfg.seed, kTruthMember);
  write_member_fields(truth_dir, "truth", model, truth, &artifacts);

  finish_stage(ctx, manifest, "gen-prior", timer, std::move(artifacts));
}

void cmd_simulate(const CommandContext& ctx) {
  const PipelineConfig& cfg = ctx.config;
  Manifest manifest = load_checked_manifest(ctx);
  require_stages(manifest, {"gen-prior"});
  StageTimer timer;

  const auto truth_dir = cfg.output_dir / "truth";
  const ScalarField perm = read_field(truth_dir / "truth_perm.txt", cfg.grid);
  const ScalarField poro = read_field(truth_dir / "truth_poro.txt", cfg.grid);
  const sim::SimulationResult result =
      sim::run_simulation(perm, poro, *cfg.relperm, cfg.fluid, cfg.wells, cfg.sim);

  std::vector<std::string> artifacts;
  sim::write_rates_csv(truth_dir / "rates.csv", result);
  artifacts.push_back((truth_dir / "rates.csv").string());

  char name[32];
  for (std::size_t s = 0; s < result.steps.size(); ++s) {
    ScalarField f(cfg.grid);
    f.values = result.steps[s].sw;
    std::snprintf(name, sizeof(name), "sw_%03zu.txt", s + 1);
    write_field(truth_dir / name, f);
    artifacts.push_back((truth_dir / name).string());
    f.values = result.steps[s].pressure;
    std::snprintf(name, sizeof(name), "pressure_%03zu.txt", s + 1);
    write_field(truth_dir / name, f);
    artifacts.push_back((truth_dir / name).string());
  }

  const double dwip = result.final_water_in_place_stb - result.initial_water_in_place_stb;
  const double residual = result.injected_water_stb - result.produced_water_stb - dwip;
  std::ostringstream ss;
  ss << "injected_water_stb " << io::format_double(result.injected_water_stb) << '\n'
     << "produced_water_stb " << io::format_double(result.produced_water_stb) << '\n'
     << "produced_oil_stb " << io::format_double(result.produced_oil_stb) << '\n'
     << "initial_water_in_place_stb " << io::format_double(result.initial_water_in_place_stb)
     << '\n'
     << "final_water_in_place_stb " << io::format_double(result.final_water_in_place_stb) << '\n'
     << "mass_balance_residual_stb " << io::format_double(residual) << '\n'
     << "mass_balance_relative " << io::format_double(std::abs(residual) / result.injected_water_stb)
     << '\n';
  io::write_text_file(truth_dir / "summary.txt", ss.str());
  artifacts.push_back((truth_dir / "summary.txt").string());

  finish_stage(ctx, manifest, "simulate", timer, std::move(artifacts));
}

void cmd_train_ccr(const CommandContext& ctx) {
  const PipelineConfig& cfg = ctx.config;
  Manifest manifest = load_checked_manifest(ctx);
  require_stages(manifest, {"gen-prior"});
  StageTimer timer;

  const prior::PriorModel model(cfg.grid, cfg.prior);
  const surrogate::FeatureSchema schema = surrogate::make_schema(cfg.wells);

  const int runs = cfg.surrogate.training_runs;
  std::vector<Eigen::MatrixXd> features(static_cast<std::size_t>(runs));
  std::vector<Eigen::MatrixXd> labels(static_cast<std::size_t>(runs));
  parallel_for(static_cast<std::size_t>(runs), ctx.workers, [&](std::size_t r) {
    ScalarField perm, poro;
    model.decode(model.sample_member(cfg.seed, kTrainingMemberOffset + static_cast<int>(r)), perm,
                 poro);
    const sim::SimulationResult res =
        sim::run_simulation(perm, poro, *cfg.relperm, cfg.fluid, cfg.wells, cfg.sim);
    features[r] = surrogate::build_features(res, perm, cfg.wells, schema);
    labels[r] = surrogate::generate_labels(res, perm, *cfg.relperm, cfg.fluid, cfg.wells, schema);
  });

  surrogate::RatesDataset dataset;
  dataset.schema = schema;
  for (int r = 0; r < runs; ++r)
    surrogate::append_run(dataset, features[static_cast<std::size_t>(r)],
                          labels[static_cast<std::size_t>(r)]);

  const surrogate::SurrogateBundle bundle =
      surrogate::train_surrogate(dataset, cfg.ccr, cfg.seed, ctx.workers);

  const auto surr_dir = cfg.output_dir / "surrogate";
  std::vector<std::string> artifacts;
  surrogate::save_dataset_csv(surr_dir / "dataset.csv", dataset);
  artifacts.push_back((surr_dir / "dataset.csv").string());
  surrogate::save_bundle(surr_dir / "bundle", bundle);
  artifacts.push_back((surr_dir / "bundle").string());

  const auto channels = schema.channel_names();
  for (std::size_t ch = 0; ch < channels.size(); ++ch)
    std::cout << "surrogate channel " << channels[ch]
              << " validation mse: " << bundle.validation_mse[ch] << '\n';

  finish_stage(ctx, manifest, "train-ccr", timer, std::move(artifacts));
}

void cmd_invert(const CommandContext& ctx) {
  const PipelineConfig& cfg = ctx.config;
  Manifest manifest = load_checked_manifest(ctx);
  const bool use_surrogate = cfg.inversion.forward == "surrogate";
  if (use_surrogate)
    require_stages(manifest, {"gen-prior", "simulate", "train-ccr"});
  else
    require_stages(manifest, {"gen-prior", "simulate"});
  StageTimer timer;

  const prior::PriorModel model(cfg.grid, cfg.prior);
  const ObsLayout layout = make_layout(cfg);

  // Observed data: truth rates plus Gaussian noise, persisted so downstream
  // stages never have to touch the truth run again.
  eki::Observations obs;
  obs.meta = build_meta(cfg, layout);
  obs.num_time_steps = layout.steps();
  const Eigen::VectorXd d_truth =
      truth_data_from_rates(io::read_csv(cfg.output_dir / "truth" / "rates.csv"), layout);
  obs.y.resize(layout.dim());
  obs.gamma_diag.resize(layout.dim());
  CounterRng noise_rng = CounterRng::stream(cfg.seed, kObsNoiseTag);
  for (Eigen::Index d = 0; d < layout.dim(); ++d) {
    const double sigma = cfg.inversion.noise_rel * std::abs(d_truth[d]) +
                         noise_floor(cfg.inversion.noise_floors, obs.meta[d].quantity);
    obs.y[d] = d_truth[d] + sigma * noise_rng.next_normal();
    obs.gamma_diag[d] = sigma * sigma;
  }

  const auto inv_dir = cfg.output_dir / "inversion";
  const auto post_dir = cfg.output_dir / "posterior";
  std::vector<std::string> artifacts;
  write_observations_csv(inv_dir / "observations.csv", obs);
  artifacts.push_back((inv_dir / "observations.csv").string());

  const Eigen::MatrixXd prior_members = read_ensemble(cfg.output_dir / "prior" / "ensemble.txt");
  if (prior_members.rows() != model.param_dim())
    throw DataError("prior ensemble dimension does not match the configured prior");

  const sim::SimConfig window_cfg = window_sim_config(cfg, layout);
  surrogate::SurrogateBundle bundle;
  if (use_surrogate) {
    bundle = surrogate::load_bundle(cfg.output_dir / "surrogate" / "bundle");
    if (bundle.schema.producers != layout.producers)
      throw DataError("surrogate bundle producers do not match the well config");
  }

  const eki::ForwardFn forward = [&](const Eigen::VectorXd& u, int) -> Eigen::VectorXd {
    ScalarField perm, poro;
    model.decode(u, perm, poro);
    const sim::SimulationResult res =
        sim::run_simulation(perm, poro, *cfg.relperm, cfg.fluid, cfg.wells, window_cfg);
    if (!use_surrogate) return extract_predictions(res, layout);

    // Producer rates from the surrogate; injector BHP stays on the simulator.
    const Eigen::MatrixXd X = surrogate::build_features(res, perm, cfg.wells, bundle.schema);
    const Eigen::MatrixXd Y = surrogate::infer_rates(bundle, bundle.schema, X);
    Eigen::VectorXd out(layout.dim());
    Eigen::Index pos = 0;
    for (int s = 0; s < layout.steps(); ++s) {
      for (std::size_t p = 0; p < layout.producers.size(); ++p) {
        const double oil = Y(s, static_cast<Eigen::Index>(2 * p));
        const double water = Y(s, static_cast<Eigen::Index>(2 * p + 1));
        out[pos++] = oil;
        out[pos++] = water;
        out[pos++] = oil + water > 0.0 ? water / (oil + water) : 0.0;
      }
      const auto& rates = res.steps[static_cast<std::size_t>(s)].rates;
      for (const auto& name : layout.injectors) {
        const WellRates* found = nullptr;
        for (const auto& r : rates)
          if (r.well == name) found = &r;
        if (!found) throw DataError("rate record missing injector " + name);
        out[pos++] = found->bhp_psia;
      }
    }
    return out;
  };

  eki::ArekiConfig acfg;
  acfg.max_iterations = cfg.inversion.max_iterations;
  acfg.localization = cfg.inversion.localization;
  acfg.workers = ctx.workers;
  const eki::InversionResult result =
      eki::run_inversion(prior_members, model.param_meta(), obs, forward, acfg, cfg.seed);

  write_ensemble(post_dir / "ensemble.txt", result.posterior);
  artifacts.push_back((post_dir / "ensemble.txt").string());
  write_member_fields(post_dir, "map", model, result.posterior.col(result.map_member),
                      &artifacts);
  write_member_fields(post_dir, "mean", model, result.mean_model, &artifacts);

  io::CsvTable log;
  log.header = {"iteration", "phi_mean", "phi_var", "alpha_inv", "s_after"};
  double sum_alpha_inv = 0.0;
  for (const auto& it : result.state.iterations) {
    sum_alpha_inv += it.alpha_inv;
    log.rows.push_back({std::to_string(it.n), io::format_double(it.phi_mean),
                        io::format_double(it.phi_var), io::format_double(it.alpha_inv),
                        io::format_double(it.s_after)});
  }
  io::write_csv(inv_dir / "log.csv", log);
  artifacts.push_back((inv_dir / "log.csv").string());

  double initial_mean = 0.0, final_mean = 0.0;
  for (double p : result.initial_phi) initial_mean += p;
  for (double p : result.final_phi) final_mean += p;
  initial_mean /= static_cast<double>(result.initial_phi.size());
  final_mean /= static_cast<double>(result.final_phi.size());
  std::ostringstream ss;
  ss << "stop " << stop_reason_name(result.state.stop) << '\n'
     << "iterations " << result.state.iterations.size() << '\n'
     << "s " << io::format_double(result.state.s) << '\n'
     << "sum_alpha_inv " << io::format_double(sum_alpha_inv) << '\n'
     << "map_member " << result.map_member << '\n'
     << "initial_phi_mean " << io::format_double(initial_mean) << '\n'
     << "final_phi_mean " << io::format_double(final_mean) << '\n';
  io::write_text_file(inv_dir / "summary.txt", ss.str());
  artifacts.push_back((inv_dir / "summary.txt").string());

  write_predictions_csv(inv_dir / "predictions_prior.csv", obs, result.initial_predictions);
  artifacts.push_back((inv_dir / "predictions_prior.csv").string());
  write_predictions_csv(inv_dir / "predictions_posterior.csv", obs, result.final_predictions);
  artifacts.push_back((inv_dir / "predictions_posterior.csv").string());

  finish_stage(ctx, manifest, "invert", timer, std::move(artifacts));
}

void cmd_metrics(const CommandContext& ctx) {
  const PipelineConfig& cfg = ctx.config;
  Manifest manifest = load_checked_manifest(ctx);
  require_stages(manifest, {"gen-prior", "simulate", "invert"});
  StageTimer timer;

  const prior::PriorModel model(cfg.grid, cfg.prior);
  const eki::Observations obs =
      read_observations_csv(cfg.output_dir / "inversion" / "observations.csv");
  const Eigen::VectorXd sigma = obs.gamma_diag.cwiseSqrt();
  const Eigen::MatrixXd pred_prior =
      read_predictions_csv(cfg.output_dir / "inversion" / "predictions_prior.csv");
  const Eigen::MatrixXd pred_post =
      read_predictions_csv(cfg.output_dir / "inversion" / "predictions_posterior.csv");
  const Eigen::MatrixXd prior_members = read_ensemble(cfg.output_dir / "prior" / "ensemble.txt");
  const Eigen::MatrixXd post_members =
      read_ensemble(cfg.output_dir / "posterior" / "ensemble.txt");
  const ScalarField truth_perm = read_field(cfg.output_dir / "truth" / "truth_perm.txt", cfg.grid);

  const Eigen::Index J = prior_members.cols();
  auto report = [&](const Eigen::MatrixXd& members, const Eigen::MatrixXd& pred,
                    const std::filesystem::path& path, double* mean_rmse, double* mean_phi) {
    io::CsvTable table;
    table.header = {"member", "rmse", "ssim", "phi_ssim", "overall_cost"};
    double rmse_acc = 0.0, phi_acc = 0.0;
    for (Eigen::Index j = 0; j < J; ++j) {
      const double rmse = metrics::normalized_rmse(obs.y, pred.col(j), sigma, obs.num_time_steps);
      ScalarField perm, poro;
      model.decode(members.col(j), perm, poro);
      const double s = metrics::ssim(truth_perm, perm, cfg.ssim);
      const double phi = std::abs(1.0 - s);
      rmse_acc += rmse;
      phi_acc += phi;
      table.rows.push_back({std::to_string(j), io::format_double(rmse), io::format_double(s),
                            io::format_double(phi), io::format_double(phi + rmse)});
    }
    io::write_csv(path, table);
    *mean_rmse = rmse_acc / static_cast<double>(J);
    *mean_phi = phi_acc / static_cast<double>(J);
  };

  const auto met_dir = cfg.output_dir / "metrics";
  std::vector<std::string> artifacts;
  double prior_rmse = 0.0, prior_phi = 0.0, post_rmse = 0.0, post_phi = 0.0;
  report(prior_members, pred_prior, met_dir / "metrics_prior.csv", &prior_rmse, &prior_phi);
  artifacts.push_back((met_dir / "metrics_prior.csv").string());
  report(post_members, pred_post, met_dir / "metrics_posterior.csv", &post_rmse, &post_phi);
  artifacts.push_back((met_dir / "metrics_posterior.csv").string());

  // The regularized-misfit minimizer doubles as the map model downstream.
  Eigen::Index map_member = 0;
  double best = std::numeric_limits<double>::max();
  for (Eigen::Index j = 0; j < J; ++j) {
    const double phi = eki::data_misfit(obs.y, pred_post.col(j), obs.gamma_diag);
    if (phi < best) {
      best = phi;
      map_member = j;
    }
  }
  ScalarField map_perm, map_poro;
  model.decode(post_members.col(map_member), map_perm, map_poro);
  const double map_phi_ssim = metrics::phi_ssim(truth_perm, map_perm, cfg.ssim);

  std::ostringstream ss;
  ss << "mean_prior_rmse " << io::format_double(prior_rmse) << '\n'
     << "mean_posterior_rmse " << io::format_double(post_rmse) << '\n'
     << "rmse_ratio " << io::format_double(post_rmse / prior_rmse) << '\n'
     << "mean_prior_phi_ssim " << io::format_double(prior_phi) << '\n'
     << "mean_posterior_phi_ssim " << io::format_double(post_phi) << '\n'
     << "map_member " << map_member << '\n'
     << "map_phi_ssim " << io::format_double(map_phi_ssim) << '\n'
     << "map_phi_ssim_ratio " << io::format_double(map_phi_ssim / prior_phi) << '\n';
  io::write_text_file(met_dir / "summary.txt", ss.str());
  artifacts.push_back((met_dir / "summary.txt").string());

  finish_stage(ctx, manifest, "metrics", timer, std::move(artifacts));
}

void cmd_plot_data(const CommandContext& ctx) {
  const PipelineConfig& cfg = ctx.config;
  Manifest manifest = load_checked_manifest(ctx);
  require_stages(manifest, {"gen-prior", "simulate", "invert"});
  StageTimer timer;

  const eki::Observations obs =
      read_observations_csv(cfg.output_dir / "inversion" / "observations.csv");
  const Eigen::MatrixXd pred_prior =
      read_predictions_csv(cfg.output_dir / "inversion" / "predictions_prior.csv");
  const Eigen::MatrixXd pred_post =
      read_predictions_csv(cfg.output_dir / "inversion" / "predictions_posterior.csv");
  const ObsLayout layout = make_layout(cfg);

  const auto plot_dir = cfg.output_dir / "plot";
  std::vector<std::string> artifacts;

  // Rate envelopes: P10/P50/P90 across members, one series per (well, quantity).
  io::CsvTable env;
  env.header = {"time",      "well",      "quantity",  "observed",
                "prior_p10", "prior_p50", "prior_p90", "posterior_p10",
                "posterior_p50", "posterior_p90"};
  const int per_step = layout.per_step();
  const Eigen::Index J = pred_prior.cols();
  auto emit_series = [&](int offset, const std::string& well, const std::string& quantity) {
    std::vector<std::vector<double>> prior_series(static_cast<std::size_t>(J)),
        post_series(static_cast<std::size_t>(J));
    for (Eigen::Index j = 0; j < J; ++j)
      for (int s = 0; s < layout.steps(); ++s) {
        const Eigen::Index d = static_cast<Eigen::Index>(s) * per_step + offset;
        prior_series[static_cast<std::size_t>(j)].push_back(pred_prior(d, j));
        post_series[static_cast<std::size_t>(j)].push_back(pred_post(d, j));
      }
    const auto prior_curves = metrics::percentile_curves(prior_series);
    const auto post_curves = metrics::percentile_curves(post_series);
    for (int s = 0; s < layout.steps(); ++s) {
      const Eigen::Index d = static_cast<Eigen::Index>(s) * per_step + offset;
      env.rows.push_back({io::format_double(layout.times[static_cast<std::size_t>(s)]), well,
                          quantity, io::format_double(obs.y[d]),
                          io::format_double(prior_curves[0][static_cast<std::size_t>(s)]),
                          io::format_double(prior_curves[1][static_cast<std::size_t>(s)]),
                          io::format_double(prior_curves[2][static_cast<std::size_t>(s)]),
                          io::format_double(post_curves[0][static_cast<std::size_t>(s)]),
                          io::format_double(post_curves[1][static_cast<std::size_t>(s)]),
                          io::format_double(post_curves[2][static_cast<std::size_t>(s)])});
    }
  };
  for (std::size_t p = 0; p < layout.producers.size(); ++p) {
    emit_series(static_cast<int>(3 * p), layout.producers[p], "oil");
    emit_series(static_cast<int>(3 * p + 1), layout.producers[p], "water");
    emit_series(static_cast<int>(3 * p + 2), layout.producers[p], "water_cut");
  }
  for (std::size_t i = 0; i < layout.injectors.size(); ++i)
    emit_series(static_cast<int>(3 * layout.producers.size() + i), layout.injectors[i], "bhp");
  io::write_csv(plot_dir / "envelopes.csv", env);
  artifacts.push_back((plot_dir / "envelopes.csv").string());

  io::write_text_file(plot_dir / "misfit.csv",
                      io::read_text_file(cfg.output_dir / "inversion" / "log.csv"));
  artifacts.push_back((plot_dir / "misfit.csv").string());

  const ScalarField truth = read_field(cfg.output_dir / "truth" / "truth_perm.txt", cfg.grid);
  const ScalarField map = read_field(cfg.output_dir / "posterior" / "map_perm.txt", cfg.grid);
  const ScalarField mean = read_field(cfg.output_dir / "posterior" / "mean_perm.txt", cfg.grid);
  io::CsvTable fields;
  fields.header = {"i", "j", "k", "truth_perm", "map_perm", "mean_perm"};
  for (int k = 0; k < cfg.grid.nz; ++k)
    for (int j = 0; j < cfg.grid.ny; ++j)
      for (int i = 0; i < cfg.grid.nx; ++i) {
        const std::size_t c = cfg.grid.index(i, j, k);
        fields.rows.push_back({std::to_string(i), std::to_string(j), std::to_string(k),
                               io::format_double(truth.values[c]),
                               io::format_double(map.values[c]),
                               io::format_double(mean.values[c])});
      }
  io::write_csv(plot_dir / "fields.csv", fields);
  artifacts.push_back((plot_dir / "fields.csv").string());

  finish_stage(ctx, manifest, "plot-data", timer, std::move(artifacts));
}

}  // namespace reskit::pipeline
