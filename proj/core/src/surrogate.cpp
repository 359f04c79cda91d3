#include "reskit/surrogate/surrogate.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "reskit/errors.hpp"
#include "reskit/io.hpp"
#include "reskit/parallel.hpp"

namespace reskit::surrogate {

namespace {
constexpr std::uint64_t kSurrogateTag = 0x73757272636372ULL;

const WellSpec& find_well(const std::vector<WellSpec>& wells, const std::string& name) {
  for (const auto& w : wells)
    if (w.name == name) return w;
  throw ConfigError("schema producer not found among wells: " + name);
}
}  // namespace

std::vector<std::string> FeatureSchema::feature_names() const {
  std::vector<std::string> names;
  for (const auto& p : producers) {
    names.push_back("k_avg:" + p);
    names.push_back("sw_avg:" + p);
    names.push_back("so_avg:" + p);
  }
  names.push_back("p_avg");
  return names;
}

std::vector<std::string> FeatureSchema::channel_names() const {
  std::vector<std::string> names;
  for (const auto& p : producers) {
    names.push_back("oil:" + p);
    names.push_back("water:" + p);
  }
  return names;
}

FeatureSchema make_schema(const std::vector<WellSpec>& wells) {
  FeatureSchema schema;
  for (const auto& w : wells)
    if (w.kind == WellKind::Producer) schema.producers.push_back(w.name);
  if (schema.producers.empty()) throw ConfigError("surrogate schema needs at least one producer");
  std::sort(schema.producers.begin(), schema.producers.end());
  return schema;
}

Eigen::MatrixXd build_features(const sim::SimulationResult& result, const ScalarField& perm,
                               const std::vector<WellSpec>& wells, const FeatureSchema& schema) {
  if (result.steps.empty()) throw DataError("build features: no recorded steps");
  const GridSpec& g = result.grid;
  const Eigen::Index rows = static_cast<Eigen::Index>(result.steps.size());
  Eigen::MatrixXd X(rows, schema.feature_dim());

  for (Eigen::Index t = 0; t < rows; ++t) {
    const sim::StepRecord& rec = result.steps[static_cast<std::size_t>(t)];
    Eigen::Index col = 0;
    double p_sum = 0.0;
    for (const auto& name : schema.producers) {
      const WellSpec& w = find_well(wells, name);
      const double inv_layers = 1.0 / w.num_layers();
      double k_avg = 0.0, sw_avg = 0.0, so_avg = 0.0, pw_avg = 0.0;
      for (int k = w.k0; k <= w.k1; ++k) {
        const std::size_t c = g.index(w.i, w.j, k);
        k_avg += perm.values[c];
        sw_avg += rec.sw[c];
        so_avg += 1.0 - rec.sw[c];
        pw_avg += rec.pressure[c];
      }
      X(t, col++) = k_avg * inv_layers;
      X(t, col++) = sw_avg * inv_layers;
      X(t, col++) = so_avg * inv_layers;
      p_sum += pw_avg * inv_layers;
    }
    X(t, col) = p_sum / static_cast<double>(schema.producers.size());
  }
  return X;
}

Eigen::MatrixXd generate_labels(const sim::SimulationResult& result, const ScalarField& perm,
                                const RelPermTable& relperm, const FluidModel& fluid,
                                const std::vector<WellSpec>& wells, const FeatureSchema& schema) {
  if (result.steps.empty()) throw DataError("generate labels: no recorded steps");
  for (const auto& name : schema.producers)
    if (find_well(wells, name).control != WellControl::Bhp)
      throw ConfigError("surrogate labels need BHP-controlled producers: " + name);

  const Eigen::Index rows = static_cast<Eigen::Index>(result.steps.size());
  Eigen::MatrixXd Y(rows, schema.label_dim());
  for (Eigen::Index t = 0; t < rows; ++t) {
    const sim::StepRecord& rec = result.steps[static_cast<std::size_t>(t)];
    const auto rates = sim::well_rates(perm, relperm, fluid, wells, rec.pressure, rec.sw);
    Eigen::Index col = 0;
    for (const auto& name : schema.producers) {
      const WellRates* found = nullptr;
      for (const auto& r : rates)
        if (r.well == name) found = &r;
      if (!found) throw DataError("rate log missing producer " + name);
      Y(t, col++) = found->oil_stb_d;
      Y(t, col++) = found->water_stb_d;
    }
  }
  return Y;
}

void append_run(RatesDataset& dataset, const Eigen::MatrixXd& features,
                const Eigen::MatrixXd& labels) {
  if (features.rows() != labels.rows()) throw DataError("append run: row count mismatch");
  if (features.cols() != dataset.schema.feature_dim() ||
      labels.cols() != dataset.schema.label_dim())
    throw DataError("append run: width does not match schema");
  if (dataset.num_runs == 0) {
    dataset.num_steps = static_cast<int>(features.rows());
    dataset.features = features;
    dataset.labels = labels;
  } else {
    if (features.rows() != dataset.num_steps) throw DataError("append run: step count mismatch");
    const Eigen::Index old_rows = dataset.features.rows();
    dataset.features.conservativeResize(old_rows + features.rows(), Eigen::NoChange);
    dataset.labels.conservativeResize(old_rows + labels.rows(), Eigen::NoChange);
    dataset.features.bottomRows(features.rows()) = features;
    dataset.labels.bottomRows(labels.rows()) = labels;
  }
  ++dataset.num_runs;
}

void save_dataset_csv(const std::filesystem::path& path, const RatesDataset& dataset) {
  io::CsvTable table;
  table.header = {"run", "step"};
  for (const auto& n : dataset.schema.feature_names()) table.header.push_back(n);
  for (const auto& n : dataset.schema.channel_names()) table.header.push_back(n);
  for (int r = 0; r < dataset.num_runs; ++r) {
    for (int t = 0; t < dataset.num_steps; ++t) {
      const Eigen::Index row = static_cast<Eigen::Index>(r) * dataset.num_steps + t;
      std::vector<std::string> fields = {std::to_string(r), std::to_string(t)};
      for (Eigen::Index c = 0; c < dataset.features.cols(); ++c)
        fields.push_back(io::format_double(dataset.features(row, c)));
      for (Eigen::Index c = 0; c < dataset.labels.cols(); ++c)
        fields.push_back(io::format_double(dataset.labels(row, c)));
      table.rows.push_back(std::move(fields));
    }
  }
  io::write_csv(path, table);
}

RatesDataset load_dataset_csv(const std::filesystem::path& path) {
  const io::CsvTable table = io::read_csv(path);
  RatesDataset dataset;
  // Recover producers from "oil:<name>" label columns; feature columns precede them.
  for (const auto& h : table.header)
    if (h.rfind("oil:", 0) == 0) dataset.schema.producers.push_back(h.substr(4));
  if (dataset.schema.producers.empty())
    throw DataError("dataset csv has no label columns: " + path.string());
  const int F = dataset.schema.feature_dim();
  const int L = dataset.schema.label_dim();
  if (static_cast<int>(table.header.size()) != 2 + F + L)
    throw DataError("dataset csv width does not match recovered schema: " + path.string());

  const Eigen::Index rows = static_cast<Eigen::Index>(table.rows.size());
  dataset.features.resize(rows, F);
  dataset.labels.resize(rows, L);
  int max_run = -1, max_step = -1;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    max_run = std::max(max_run, std::stoi(row[0]));
    max_step = std::max(max_step, std::stoi(row[1]));
    for (int c = 0; c < F; ++c) dataset.features(r, c) = std::stod(row[static_cast<std::size_t>(2 + c)]);
    for (int c = 0; c < L; ++c) dataset.labels(r, c) = std::stod(row[static_cast<std::size_t>(2 + F + c)]);
  }
  dataset.num_runs = max_run + 1;
  dataset.num_steps = max_step + 1;
  if (rows != static_cast<Eigen::Index>(dataset.num_runs) * dataset.num_steps)
    throw DataError("dataset csv has ragged runs: " + path.string());
  return dataset;
}

SurrogateBundle train_surrogate(const RatesDataset& dataset, const ccr::CcrConfig& config,
                                std::uint64_t seed, int workers) {
  if (dataset.num_runs < 1) throw DataError("train surrogate: empty dataset");
  SurrogateBundle bundle;
  bundle.schema = dataset.schema;
  bundle.train_runs = std::max(1, dataset.num_runs * 9 / 10);
  bundle.validation_runs = dataset.num_runs - bundle.train_runs;

  const Eigen::Index split = static_cast<Eigen::Index>(bundle.train_runs) * dataset.num_steps;
  const Eigen::MatrixXd train_x = dataset.features.topRows(split);
  // Fall back to scoring on the training rows when every run is needed for training.
  const Eigen::Index val_rows = dataset.features.rows() - split;
  const Eigen::MatrixXd val_x = val_rows > 0 ? dataset.features.bottomRows(val_rows) : train_x;

  const int channels = dataset.schema.label_dim();
  bundle.models.resize(static_cast<std::size_t>(channels));
  bundle.validation_mse.assign(static_cast<std::size_t>(channels), 0.0);

  parallel_for(static_cast<std::size_t>(channels), workers, [&](std::size_t ch) {
    const Eigen::VectorXd train_y = dataset.labels.col(static_cast<Eigen::Index>(ch)).head(split);
    const Eigen::VectorXd val_y =
        val_rows > 0 ? dataset.labels.col(static_cast<Eigen::Index>(ch)).tail(val_rows).eval()
                     : train_y;
    const std::uint64_t channel_seed =
        CounterRng::stream(seed, kSurrogateTag, static_cast<std::uint64_t>(ch)).next_u64();
    bundle.models[ch] = ccr::fit_ccr(train_x, train_y, config, channel_seed);
    const Eigen::VectorXd pred = ccr::predict(bundle.models[ch], val_x);
    bundle.validation_mse[ch] = (pred - val_y).squaredNorm() / static_cast<double>(val_y.size());
  });
  return bundle;
}

Eigen::MatrixXd infer_rates(const SurrogateBundle& bundle, const FeatureSchema& schema,
                            const Eigen::MatrixXd& features) {
  if (!(schema == bundle.schema)) throw DataError("infer rates: schema does not match bundle");
  if (features.cols() != schema.feature_dim())
    throw DataError("infer rates: feature width mismatch");
  Eigen::MatrixXd out(features.rows(), schema.label_dim());
  for (std::size_t ch = 0; ch < bundle.models.size(); ++ch)
    out.col(static_cast<Eigen::Index>(ch)) =
        ccr::predict(bundle.models[ch], features).cwiseMax(0.0);
  return out;
}

void save_bundle(const std::filesystem::path& dir, const SurrogateBundle& bundle) {
  std::filesystem::create_directories(dir);
  std::ostringstream ss;
  ss << "reskit-surrogate v1\n";
  ss << "producers " << bundle.schema.producers.size();
  for (const auto& p : bundle.schema.producers) ss << ' ' << p;
  ss << '\n';
  ss << "train_runs " << bundle.train_runs << " validation_runs " << bundle.validation_runs
     << '\n';
  ss << "validation_mse";
  for (double v : bundle.validation_mse) ss << ' ' << io::format_double(v);
  ss << '\n';
  io::write_text_file(dir / "schema.txt", ss.str());

  char name[32];
  for (std::size_t ch = 0; ch < bundle.models.size(); ++ch) {
    std::snprintf(name, sizeof(name), "channel_%02zu.ccr", ch);
    ccr::save_ccr(dir / name, bundle.models[ch]);
  }
}

SurrogateBundle load_bundle(const std::filesystem::path& dir) {
  std::istringstream in(io::read_text_file(dir / "schema.txt"));
  std::string magic, version, word;
  in >> magic >> version;
  if (magic != "reskit-surrogate" || version != "v1")
    throw DataError("not a surrogate bundle: " + dir.string());

  SurrogateBundle bundle;
  std::size_t n = 0;
  in >> word >> n;
  if (word != "producers") throw DataError("surrogate schema corrupt: " + dir.string());
  bundle.schema.producers.resize(n);
  for (auto& p : bundle.schema.producers) in >> p;
  in >> word >> bundle.train_runs >> word >> bundle.validation_runs;
  in >> word;
  if (word != "validation_mse") throw DataError("surrogate schema corrupt: " + dir.string());
  bundle.validation_mse.resize(static_cast<std::size_t>(bundle.schema.label_dim()));
  for (auto& v : bundle.validation_mse) in >> v;
  if (!in) throw DataError("surrogate schema truncated: " + dir.string());

  char name[32];
  bundle.models.resize(static_cast<std::size_t>(bundle.schema.label_dim()));
  for (std::size_t ch = 0; ch < bundle.models.size(); ++ch) {
    std::snprintf(name, sizeof(name), "channel_%02zu.ccr", ch);
    bundle.models[ch] = ccr::load_ccr(dir / name);
  }
  return bundle;
}

}  // namespace reskit::surrogate
