#include "reskit/ccr/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "reskit/errors.hpp"
#include "reskit/io.hpp"

namespace reskit::ccr {

namespace {

double sqdist(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  return (a - b).squaredNorm();
}

KMeansResult kmeans_once(const Eigen::MatrixXd& points, int k, int iters, CounterRng& rng) {
  const Eigen::Index n = points.rows();
  KMeansResult result;
  result.centers.resize(k, points.cols());
  result.assign.assign(static_cast<std::size_t>(n), -1);

  // k-means++ seeding.
  result.centers.row(0) = points.row(static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd d2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::max());
  for (int c = 1; c < k; ++c) {
    for (Eigen::Index p = 0; p < n; ++p)
      d2[p] = std::min(d2[p], sqdist(points.row(p), result.centers.row(c - 1)));
    const double total = d2.sum();
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      const double u = rng.next_double() * total;
      double acc = 0.0;
      for (Eigen::Index p = 0; p < n; ++p) {
        acc += d2[p];
        if (acc >= u) {
          pick = p;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(n)));
    }
    result.centers.row(c) = points.row(pick);
  }

  std::vector<Eigen::Index> count(static_cast<std::size_t>(k), 0);
  for (int it = 0; it < iters; ++it) {
    bool changed = false;
    for (Eigen::Index p = 0; p < n; ++p) {
      int best = 0;
      double best_d = sqdist(points.row(p), result.centers.row(0));
      for (int c = 1; c < k; ++c) {
        const double d = sqdist(points.row(p), result.centers.row(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (result.assign[static_cast<std::size_t>(p)] != best) {
        result.assign[static_cast<std::size_t>(p)] = best;
        changed = true;
      }
    }

    std::fill(count.begin(), count.end(), 0);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    for (Eigen::Index p = 0; p < n; ++p) {
      sums.row(result.assign[static_cast<std::size_t>(p)]) += points.row(p);
      ++count[static_cast<std::size_t>(result.assign[static_cast<std::size_t>(p)])];
    }
    bool reseeded = false;
    for (int c = 0; c < k; ++c) {
      if (count[static_cast<std::size_t>(c)] > 0) {
        result.centers.row(c) = sums.row(c) / static_cast<double>(count[static_cast<std::size_t>(c)]);
      } else {
        // Reseed an emptied cluster at the point farthest from its own center.
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index p = 0; p < n; ++p) {
          const double d =
              sqdist(points.row(p), result.centers.row(result.assign[static_cast<std::size_t>(p)]));
          if (d > far_d) {
            far_d = d;
            far = p;
          }
        }
        result.centers.row(c) = points.row(far);
        result.assign[static_cast<std::size_t>(far)] = c;
        reseeded = true;
      }
    }
    if (!changed && !reseeded) break;
  }

  result.sse = 0.0;
  for (Eigen::Index p = 0; p < n; ++p)
    result.sse += sqdist(points.row(p), result.centers.row(result.assign[static_cast<std::size_t>(p)]));
  return result;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out = logits;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

double gate_loss(const Eigen::MatrixXd& Xs, const std::vector<int>& labels,
                 const Eigen::MatrixXd& W, const Eigen::VectorXd& b, double l2) {
  const Eigen::Index n = Xs.rows();
  Eigen::MatrixXd logits = Xs * W.transpose();
  logits.rowwise() += b.transpose();
  double ce = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    ce += lse - logits(r, labels[static_cast<std::size_t>(r)]);
  }
  return ce / static_cast<double>(n) + 0.5 * l2 * W.squaredNorm();
}

void fit_gate(const Eigen::MatrixXd& Xs, const std::vector<int>& labels, const CcrConfig& cfg,
              Eigen::MatrixXd& W, Eigen::VectorXd& b) {
  const Eigen::Index n = Xs.rows();
  const int L = cfg.num_experts;
  W = Eigen::MatrixXd::Zero(L, Xs.cols());
  b = Eigen::VectorXd::Zero(L);
  double loss = gate_loss(Xs, labels, W, b, cfg.gate_l2);
  double step = cfg.gate_step;

  for (int it = 0; it < cfg.gate_iters; ++it) {
    Eigen::MatrixXd logits = Xs * W.transpose();
    logits.rowwise() += b.transpose();
    Eigen::MatrixXd P = softmax_rows(logits);
    for (Eigen::Index r = 0; r < n; ++r) P(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
    P /= static_cast<double>(n);
    const Eigen::MatrixXd dW = P.transpose() * Xs + cfg.gate_l2 * W;
    const Eigen::VectorXd db = P.colwise().sum().transpose();

    Eigen::MatrixXd Wn;
    Eigen::VectorXd bn;
    double loss_n;
    for (;;) {
      Wn = W - step * dW;
      bn = b - step * db;
      loss_n = gate_loss(Xs, labels, Wn, bn, cfg.gate_l2);
      if (loss_n <= loss || step < 1e-12) break;
      step *= 0.5;
    }
    if (loss_n > loss) break;  // step floor hit without improvement
    W = Wn;
    b = bn;
    loss = loss_n;
    step = std::min(step * 2.0, cfg.gate_step);
  }
}

int num_features(int dim, bool quadratic) {
  return quadratic ? dim + dim * (dim + 1) / 2 : dim;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int restarts, int iters,
                    CounterRng& rng) {
  if (k < 1 || points.rows() < k) throw ConfigError("kmeans needs 1 <= k <= #points");
  KMeansResult best;
  for (int r = 0; r < restarts; ++r) {
    KMeansResult cand = kmeans_once(points, k, iters, rng);
    if (r == 0 || cand.sse < best.sse) best = std::move(cand);
  }
  return best;
}

Eigen::VectorXd expert_features(const Eigen::VectorXd& x_scaled, bool quadratic) {
  const Eigen::Index d = x_scaled.size();
  if (!quadratic) return x_scaled;
  Eigen::VectorXd f(num_features(static_cast<int>(d), true));
  f.head(d) = x_scaled;
  Eigen::Index pos = d;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i; j < d; ++j) f[pos++] = x_scaled[i] * x_scaled[j];
  return f;
}

CcrModel fit_ccr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const CcrConfig& config,
                 std::uint64_t seed) {
  const Eigen::Index n = X.rows();
  const int d = static_cast<int>(X.cols());
  if (n != y.size() || n == 0) throw ConfigError("ccr fit: empty data or size mismatch");
  if (config.num_experts < 1) throw ConfigError("ccr fit: num_experts must be >= 1");
  if (n < config.num_experts) throw ConfigError("ccr fit: fewer samples than experts");

  CcrModel m;
  m.dim = d;
  m.num_experts = config.num_experts;
  m.quadratic = config.quadratic_features;
  m.x_min.resize(static_cast<std::size_t>(d));
  m.x_span.resize(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    m.x_min[static_cast<std::size_t>(j)] = X.col(j).minCoeff();
    const double span = X.col(j).maxCoeff() - m.x_min[static_cast<std::size_t>(j)];
    m.x_span[static_cast<std::size_t>(j)] = span > 0.0 ? span : 1.0;
  }
  m.y_min = y.minCoeff();
  const double yspan = y.maxCoeff() - m.y_min;
  m.y_span = yspan > 0.0 ? yspan : 1.0;

  Eigen::MatrixXd Xs(n, d);
  for (int j = 0; j < d; ++j)
    Xs.col(j) = (X.col(j).array() - m.x_min[static_cast<std::size_t>(j)]) /
                m.x_span[static_cast<std::size_t>(j)];
  Eigen::VectorXd ys = (y.array() - m.y_min) / m.y_span;

  // Emphasize the label during clustering so regimes split along the response.
  const double cw =
      config.cluster_label_weight < 0.0 ? 10.0 * static_cast<double>(d) : config.cluster_label_weight;
  Eigen::MatrixXd joint(n, d + 1);
  joint.leftCols(d) = Xs;
  joint.col(d) = cw * ys;

  CounterRng rng = CounterRng::stream(seed, 0x6363726b6d65616eULL);
  const KMeansResult km =
      kmeans(joint, config.num_experts, config.kmeans_restarts, config.kmeans_iters, rng);

  fit_gate(Xs, km.assign, config, m.gate_w, m.gate_b);

  const int F = num_features(d, m.quadratic);
  m.expert_w = Eigen::MatrixXd::Zero(config.num_experts, F);
  m.expert_b = Eigen::VectorXd::Zero(config.num_experts);
  for (int l = 0; l < config.num_experts; ++l) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index p = 0; p < n; ++p)
      if (km.assign[static_cast<std::size_t>(p)] == l) idx.push_back(p);
    if (idx.empty()) {
      m.expert_b[l] = ys.mean();
      continue;
    }
    if (static_cast<int>(idx.size()) < F) {
      double mean = 0.0;
      for (Eigen::Index p : idx) mean += ys[p];
      m.expert_b[l] = mean / static_cast<double>(idx.size());
      continue;
    }
    Eigen::MatrixXd Phi(static_cast<Eigen::Index>(idx.size()), F);
    Eigen::VectorXd yl(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      Phi.row(static_cast<Eigen::Index>(r)) =
          expert_features(Xs.row(idx[r]).transpose(), m.quadratic).transpose();
      yl[static_cast<Eigen::Index>(r)] = ys[idx[r]];
    }
    const Eigen::RowVectorXd phi_mean = Phi.colwise().mean();
    const double y_mean = yl.mean();
    Phi.rowwise() -= phi_mean;
    yl.array() -= y_mean;
    Eigen::MatrixXd normal = Phi.transpose() * Phi;
    normal.diagonal().array() += config.ridge_lambda;
    const Eigen::VectorXd beta = normal.ldlt().solve(Phi.transpose() * yl);
    m.expert_w.row(l) = beta.transpose();
    m.expert_b[l] = y_mean - phi_mean.dot(beta);
  }
  return m;
}

int gate_route(const CcrModel& model, const Eigen::VectorXd& x) {
  Eigen::VectorXd xs(model.dim);
  for (int j = 0; j < model.dim; ++j)
    xs[j] = (x[j] - model.x_min[static_cast<std::size_t>(j)]) /
            model.x_span[static_cast<std::size_t>(j)];
  const Eigen::VectorXd logits = model.gate_w * xs + model.gate_b;
  int best = 0;
  for (int l = 1; l < model.num_experts; ++l)
    if (logits[l] > logits[best]) best = l;
  return best;
}

double predict_one(const CcrModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.dim) throw DataError("ccr predict: dimension mismatch");
  Eigen::VectorXd xs(model.dim);
  for (int j = 0; j < model.dim; ++j)
    xs[j] = (x[j] - model.x_min[static_cast<std::size_t>(j)]) /
            model.x_span[static_cast<std::size_t>(j)];
  const int l = gate_route(model, x);
  const Eigen::VectorXd f = expert_features(xs, model.quadratic);
  const double ys = model.expert_w.row(l).dot(f) + model.expert_b[l];
  return model.y_min + ys * model.y_span;
}

Eigen::VectorXd predict(const CcrModel& model, const Eigen::MatrixXd& X) {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) out[r] = predict_one(model, X.row(r).transpose());
  return out;
}

void save_ccr(const std::filesystem::path& path, const CcrModel& model) {
  std::ostringstream ss;
  ss << "reskit-ccr v1\n";
  ss << "dim " << model.dim << " experts " << model.num_experts << " quadratic "
     << (model.quadratic ? 1 : 0) << '\n';
  ss << "y_min " << io::format_double(model.y_min) << '\n';
  ss << "y_span " << io::format_double(model.y_span) << '\n';
  auto write_vec = [&ss](const char* key, const double* v, Eigen::Index n) {
    ss << key;
    for (Eigen::Index i = 0; i < n; ++i) ss << ' ' << io::format_double(v[i]);
    ss << '\n';
  };
  write_vec("x_min", model.x_min.data(), static_cast<Eigen::Index>(model.x_min.size()));
  write_vec("x_span", model.x_span.data(), static_cast<Eigen::Index>(model.x_span.size()));
  for (int l = 0; l < model.num_experts; ++l) {
    const Eigen::RowVectorXd row = model.gate_w.row(l);
    write_vec("gate_w", row.data(), row.size());
  }
  write_vec("gate_b", model.gate_b.data(), model.gate_b.size());
  for (int l = 0; l < model.num_experts; ++l) {
    const Eigen::RowVectorXd row = model.expert_w.row(l);
    write_vec("expert_w", row.data(), row.size());
  }
  write_vec("expert_b", model.expert_b.data(), model.expert_b.size());
  io::write_text_file(path, ss.str());
}

CcrModel load_ccr(const std::filesystem::path& path) {
  std::istringstream in(io::read_text_file(path));
  std::string magic, version;
  in >> magic >> version;
  if (magic != "reskit-ccr" || version != "v1")
    throw DataError("not a ccr model file: " + path.string());

  auto expect = [&in, &path](const char* key) {
    std::string word;
    in >> word;
    if (word != key) throw DataError("ccr model " + path.string() + ": expected '" + key + "'");
  };

  CcrModel m;
  expect("dim");
  in >> m.dim;
  expect("experts");
  in >> m.num_experts;
  expect("quadratic");
  int q = 0;
  in >> q;
  m.quadratic = q != 0;
  if (!in || m.dim < 1 || m.num_experts < 1) throw DataError("ccr model header corrupt");

  expect("y_min");
  in >> m.y_min;
  expect("y_span");
  in >> m.y_span;

  auto read_vec = [&](const char* key, double* v, Eigen::Index n) {
    expect(key);
    for (Eigen::Index i = 0; i < n; ++i) in >> v[i];
  };
  m.x_min.resize(static_cast<std::size_t>(m.dim));
  m.x_span.resize(static_cast<std::size_t>(m.dim));
  read_vec("x_min", m.x_min.data(), m.dim);
  read_vec("x_span", m.x_span.data(), m.dim);

  const int F = num_features(m.dim, m.quadratic);
  m.gate_w.resize(m.num_experts, m.dim);
  m.gate_b.resize(m.num_experts);
  m.expert_w.resize(m.num_experts, F);
  m.expert_b.resize(m.num_experts);
  for (int l = 0; l < m.num_experts; ++l) {
    Eigen::RowVectorXd row(m.dim);
    read_vec("gate_w", row.data(), m.dim);
    m.gate_w.row(l) = row;
  }
  read_vec("gate_b", m.gate_b.data(), m.num_experts);
  for (int l = 0; l < m.num_experts; ++l) {
    Eigen::RowVectorXd row(F);
    read_vec("expert_w", row.data(), F);
    m.expert_w.row(l) = row;
  }
  read_vec("expert_b", m.expert_b.data(), m.num_experts);
  if (!in) throw DataError("ccr model truncated: " + path.string());
  return m;
}

}  // namespace reskit::ccr
