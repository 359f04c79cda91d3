#include "reskit/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "reskit/errors.hpp"

namespace reskit::metrics {

double normalized_rmse(const Eigen::VectorXd& obs, const Eigen::VectorXd& sim,
                       const Eigen::VectorXd& sigma, int num_time_steps) {
  if (obs.size() != sim.size() || obs.size() != sigma.size())
    throw DataError("rmse: vector sizes differ");
  if (num_time_steps < 1) throw DataError("rmse: need at least one time step");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < obs.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw DataError("rmse: sigma must be positive");
    const double r = (obs[i] - sim[i]) / sigma[i];
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(num_time_steps));
}

namespace {

// Symmetric (edge-inclusive) reflection: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
int reflect(int t, int n) {
  while (t < 0 || t >= n) t = t < 0 ? -t - 1 : 2 * n - t - 1;
  return t;
}

double ssim_layer(const double* ref, const double* img, int nx, int ny,
                  const SsimConfig& cfg) {
  double lo = ref[0], hi = ref[0];
  for (int c = 1; c < nx * ny; ++c) {
    lo = std::min(lo, ref[c]);
    hi = std::max(hi, ref[c]);
  }
  double range = cfg.dynamic_range > 0.0 ? cfg.dynamic_range : hi - lo;
  if (range <= 0.0) range = 1.0;
  const double c1 = cfg.b1 * range * cfg.b1 * range;
  const double c2 = cfg.b2 * range * cfg.b2 * range;

  const int half = cfg.window / 2;
  const double inv_count = 1.0 / (cfg.window * cfg.window);
  double total = 0.0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (int wj = -half; wj <= half; ++wj) {
        const int jj = reflect(j + wj, ny);
        for (int wi = -half; wi <= half; ++wi) {
          const int ii = reflect(i + wi, nx);
          const double a = ref[ii + nx * jj];
          const double b = img[ii + nx * jj];
          sx += a;
          sy += b;
          sxx += a * a;
          syy += b * b;
          sxy += a * b;
        }
      }
      const double mx = sx * inv_count, my = sy * inv_count;
      const double vx = sxx * inv_count - mx * mx;
      const double vy = syy * inv_count - my * my;
      const double cxy = sxy * inv_count - mx * my;
      total += (2.0 * mx * my + c1) * (2.0 * cxy + c2) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  }
  return total / (nx * ny);
}

}  // namespace

double ssim(const ScalarField& ref, const ScalarField& img, const SsimConfig& config) {
  if (ref.grid != img.grid) throw DataError("ssim: image shapes differ");
  if (config.window < 3 || config.window % 2 == 0)
    throw ConfigError("ssim: window must be odd and >= 3");
  const int layer = ref.grid.nx * ref.grid.ny;
  double total = 0.0;
  for (int k = 0; k < ref.grid.nz; ++k)
    total += ssim_layer(ref.values.data() + static_cast<std::size_t>(k) * layer,
                        img.values.data() + static_cast<std::size_t>(k) * layer, ref.grid.nx,
                        ref.grid.ny, config);
  return total / ref.grid.nz;
}

double phi_ssim(const ScalarField& ref, const ScalarField& img, const SsimConfig& config) {
  return std::abs(1.0 - ssim(ref, img, config));
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("percentile of empty set");
  if (p < 0.0 || p > 100.0) throw DataError("percentile p outside [0,100]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p / 100.0;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

std::vector<std::vector<double>> percentile_curves(
    const std::vector<std::vector<double>>& member_series, const std::vector<double>& ps) {
  if (member_series.size() < 2) throw DataError("percentile curves need >= 2 members");
  const std::size_t len = member_series.front().size();
  for (const auto& s : member_series)
    if (s.size() != len) throw DataError("percentile curves: ragged member series");

  std::vector<std::vector<double>> curves(ps.size(), std::vector<double>(len, 0.0));
  std::vector<double> column(member_series.size());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t m = 0; m < member_series.size(); ++m) column[m] = member_series[m][t];
    for (std::size_t q = 0; q < ps.size(); ++q) curves[q][t] = percentile(column, ps[q]);
  }
  return curves;
}

}  // namespace reskit::metrics
