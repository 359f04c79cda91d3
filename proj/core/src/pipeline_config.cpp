#include "reskit/pipeline/config.hpp"

#include <set>
#include <string>

#include "json.hpp"
#include "reskit/errors.hpp"
#include "reskit/io.hpp"

namespace reskit::pipeline {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& item : obj.items())
    if (!allowed.count(item.key()))
      throw ConfigError("config: unknown key '" + item.key() + "' in section '" + section + "'");
}

GridSpec parse_grid(const json& j) {
  check_keys(j, "grid", {"nx", "ny", "nz", "dx", "dy", "dz", "depth"});
  GridSpec g;
  g.nx = j.at("nx").get<int>();
  g.ny = j.at("ny").get<int>();
  g.nz = j.at("nz").get<int>();
  g.dx = j.at("dx").get<double>();
  g.dy = j.at("dy").get<double>();
  g.dz = j.at("dz").get<double>();
  g.depth = j.value("depth", 0.0);
  if (g.nx < 1 || g.ny < 1 || g.nz < 1 || g.dx <= 0 || g.dy <= 0 || g.dz <= 0)
    throw ConfigError("config: grid dimensions must be positive");
  return g;
}

std::shared_ptr<const RelPermTable> parse_relperm(const json& j,
                                                  const std::filesystem::path& base) {
  check_keys(j, "relperm", {"csv", "corey"});
  if (j.contains("csv") == j.contains("corey"))
    throw ConfigError("config: relperm needs exactly one of 'csv' or 'corey'");
  if (j.contains("csv")) {
    std::filesystem::path p = j.at("csv").get<std::string>();
    if (p.is_relative()) p = base / p;
    return std::make_shared<RelPermTable>(RelPermTable::load_csv(p));
  }
  const json& c = j.at("corey");
  check_keys(c, "relperm.corey", {"swc", "sor", "krw_end", "kro_end", "nw", "no", "points"});
  return std::make_shared<RelPermTable>(
      RelPermTable::corey(c.at("swc").get<double>(), c.at("sor").get<double>(),
                          c.value("krw_end", 1.0), c.value("kro_end", 1.0),
                          c.value("nw", 2.0), c.value("no", 2.0), c.value("points", 101)));
}

std::vector<WellSpec> parse_wells(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("config: wells must be a nonempty array");
  std::vector<WellSpec> wells;
  for (const auto& e : j) {
    check_keys(e, "wells[]",
               {"name", "kind", "i", "j", "k0", "k1", "control", "target", "wellbore_radius",
                "skin"});
    WellSpec w;
    w.name = e.at("name").get<std::string>();
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "injector")
      w.kind = WellKind::Injector;
    else if (kind == "producer")
      w.kind = WellKind::Producer;
    else
      throw ConfigError("config: well kind must be injector|producer: " + w.name);
    w.i = e.at("i").get<int>();
    w.j = e.at("j").get<int>();
    w.k0 = e.value("k0", 0);
    w.k1 = e.value("k1", w.k0);
    const std::string control = e.at("control").get<std::string>();
    if (control == "rate")
      w.control = WellControl::Rate;
    else if (control == "bhp")
      w.control = WellControl::Bhp;
    else
      throw ConfigError("config: well control must be rate|bhp: " + w.name);
    w.target = e.at("target").get<double>();
    w.wellbore_radius = e.value("wellbore_radius", 0.25);
    w.skin = e.value("skin", 0.0);
    wells.push_back(std::move(w));
  }
  return wells;
}

sim::SimConfig parse_sim(const json& j) {
  check_keys(j, "sim",
             {"total_time_days", "step_days", "p_init", "sw_init", "cfl", "pressure_tol",
              "max_pressure_iters", "max_substeps"});
  sim::SimConfig c;
  c.total_time_days = j.at("total_time_days").get<double>();
  c.step_days = j.at("step_days").get<double>();
  c.p_init = j.value("p_init", 1000.0);
  c.sw_init = j.value("sw_init", -1.0);
  c.cfl = j.value("cfl", 0.9);
  c.pressure_tol = j.value("pressure_tol", 1e-9);
  c.max_pressure_iters = j.value("max_pressure_iters", 5000);
  c.max_substeps = j.value("max_substeps", c.max_substeps);
  if (c.cfl <= 0.0 || c.cfl > 1.0) throw ConfigError("config: sim.cfl must lie in (0,1]");
  if (c.max_substeps < 1) throw ConfigError("config: sim.max_substeps must be >= 1");
  return c;
}

prior::PriorConfig parse_prior(const json& j) {
  check_keys(j, "prior",
             {"kind", "corr_x", "corr_y", "corr_z", "variance", "kl_modes", "mean_log_k",
              "k_sand", "k_shale", "threshold_quantile", "poro_a", "poro_b", "k_min", "k_max",
              "poro_min", "poro_max", "energy_warn"});
  prior::PriorConfig c;
  c.kind = j.value("kind", c.kind);
  c.corr_x = j.value("corr_x", c.corr_x);
  c.corr_y = j.value("corr_y", c.corr_y);
  c.corr_z = j.value("corr_z", c.corr_z);
  c.variance = j.value("variance", c.variance);
  c.kl_modes = j.value("kl_modes", c.kl_modes);
  c.mean_log_k = j.value("mean_log_k", c.mean_log_k);
  c.k_sand = j.value("k_sand", c.k_sand);
  c.k_shale = j.value("k_shale", c.k_shale);
  c.threshold_quantile = j.value("threshold_quantile", c.threshold_quantile);
  c.poro_a = j.value("poro_a", c.poro_a);
  c.poro_b = j.value("poro_b", c.poro_b);
  c.k_min = j.value("k_min", c.k_min);
  c.k_max = j.value("k_max", c.k_max);
  c.poro_min = j.value("poro_min", c.poro_min);
  c.poro_max = j.value("poro_max", c.poro_max);
  c.energy_warn = j.value("energy_warn", c.energy_warn);
  return c;
}

ccr::CcrConfig parse_ccr(const json& j) {
  check_keys(j, "ccr",
             {"num_experts", "quadratic_features", "ridge_lambda", "gate_l2", "gate_iters",
              "gate_step", "kmeans_restarts", "kmeans_iters", "cluster_label_weight"});
  ccr::CcrConfig c;
  c.num_experts = j.value("num_experts", c.num_experts);
  c.quadratic_features = j.value("quadratic_features", c.quadratic_features);
  c.ridge_lambda = j.value("ridge_lambda", c.ridge_lambda);
  c.gate_l2 = j.value("gate_l2", c.gate_l2);
  c.gate_iters = j.value("gate_iters", c.gate_iters);
  c.gate_step = j.value("gate_step", c.gate_step);
  c.kmeans_restarts = j.value("kmeans_restarts", c.kmeans_restarts);
  c.kmeans_iters = j.value("kmeans_iters", c.kmeans_iters);
  c.cluster_label_weight = j.value("cluster_label_weight", c.cluster_label_weight);
  return c;
}

InversionConfig parse_inversion(const json& j) {
  check_keys(j, "inversion",
             {"max_iterations", "noise_rel", "noise_floors", "assimilation_fraction",
              "localization", "forward"});
  InversionConfig c;
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.noise_rel = j.value("noise_rel", c.noise_rel);
  if (j.contains("noise_floors")) {
    const json& f = j.at("noise_floors");
    check_keys(f, "inversion.noise_floors", {"oil", "water", "water_cut", "bhp"});
    c.noise_floors.oil = f.value("oil", c.noise_floors.oil);
    c.noise_floors.water = f.value("water", c.noise_floors.water);
    c.noise_floors.water_cut = f.value("water_cut", c.noise_floors.water_cut);
    c.noise_floors.bhp = f.value("bhp", c.noise_floors.bhp);
  }
  c.assimilation_fraction = j.value("assimilation_fraction", c.assimilation_fraction);
  if (j.contains("localization")) {
    const json& l = j.at("localization");
    check_keys(l, "inversion.localization", {"enabled", "radius_cells"});
    c.localization.enabled = l.value("enabled", false);
    c.localization.radius_cells = l.value("radius_cells", 10.0);
  }
  c.forward = j.value("forward", c.forward);
  if (c.forward != "fvm" && c.forward != "surrogate")
    throw ConfigError("config: inversion.forward must be fvm|surrogate");
  if (c.assimilation_fraction <= 0.0 || c.assimilation_fraction > 1.0)
    throw ConfigError("config: assimilation_fraction must lie in (0,1]");
  if (c.max_iterations < 0) throw ConfigError("config: max_iterations must be >= 0");
  if (c.noise_rel < 0.0) throw ConfigError("config: noise_rel must be >= 0");
  if (c.noise_floors.oil <= 0.0 || c.noise_floors.water <= 0.0 ||
      c.noise_floors.water_cut <= 0.0 || c.noise_floors.bhp <= 0.0)
    throw ConfigError("config: noise floors must be positive");
  if (c.localization.enabled && c.localization.radius_cells <= 0.0)
    throw ConfigError("config: localization radius must be positive");
  return c;
}

metrics::SsimConfig parse_metrics(const json& j) {
  check_keys(j, "metrics", {"ssim_window", "ssim_b1", "ssim_b2", "ssim_dynamic_range"});
  metrics::SsimConfig c;
  c.window = j.value("ssim_window", c.window);
  c.b1 = j.value("ssim_b1", c.b1);
  c.b2 = j.value("ssim_b2", c.b2);
  c.dynamic_range = j.value("ssim_dynamic_range", c.dynamic_range);
  return c;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  json root;
  try {
    root = json::parse(io::read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }

  try {
    check_keys(root, "(top level)",
               {"seed", "output_dir", "ensemble_size", "grid", "relperm", "fluid", "wells",
                "sim", "prior", "ccr", "surrogate", "inversion", "metrics"});

    PipelineConfig cfg;
    cfg.seed = root.at("seed").get<std::uint64_t>();
    cfg.output_dir = root.at("output_dir").get<std::string>();
    cfg.ensemble_size = root.value("ensemble_size", 100);
    if (cfg.ensemble_size < 2) throw ConfigError("config: ensemble_size must be >= 2");

    const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
    cfg.grid = parse_grid(root.at("grid"));
    cfg.relperm = parse_relperm(root.at("relperm"), base);
    if (root.contains("fluid")) {
      check_keys(root.at("fluid"), "fluid", {"mu_w", "mu_o"});
      cfg.fluid.mu_w = root.at("fluid").value("mu_w", 1.0);
      cfg.fluid.mu_o = root.at("fluid").value("mu_o", 2.0);
      if (cfg.fluid.mu_w <= 0.0 || cfg.fluid.mu_o <= 0.0)
        throw ConfigError("config: viscosities must be positive");
    }
    cfg.wells = parse_wells(root.at("wells"));
    validate_wells(cfg.grid, cfg.wells);
    cfg.sim = parse_sim(root.at("sim"));
    cfg.prior = root.contains("prior") ? parse_prior(root.at("prior")) : prior::PriorConfig{};
    prior::validate(cfg.grid, cfg.prior);
    cfg.ccr = root.contains("ccr") ? parse_ccr(root.at("ccr")) : ccr::CcrConfig{};
    if (root.contains("surrogate")) {
      check_keys(root.at("surrogate"), "surrogate", {"training_runs"});
      cfg.surrogate.training_runs = root.at("surrogate").value("training_runs", 30);
      if (cfg.surrogate.training_runs < 1)
        throw ConfigError("config: surrogate.training_runs must be >= 1");
    }
    cfg.inversion =
        root.contains("inversion") ? parse_inversion(root.at("inversion")) : InversionConfig{};
    cfg.ssim = root.contains("metrics") ? parse_metrics(root.at("metrics")) : metrics::SsimConfig{};
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

}  // namespace reskit::pipeline
