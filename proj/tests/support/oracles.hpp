// Slow, independently coded reference implementations used to cross-check the
// library. Everything here favours obviousness over speed.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "reskit/grid.hpp"

namespace oracle {

// Dense Gaussian elimination with partial pivoting.
inline Eigen::VectorXd gauss_solve(Eigen::MatrixXd a, Eigen::VectorXd b) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.size() != n) throw std::invalid_argument("gauss_solve shape");
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    if (a(pivot, col) == 0.0) throw std::runtime_error("gauss_solve: singular matrix");
    if (pivot != col) {
      a.row(pivot).swap(a.row(col));
      std::swap(b[pivot], b[col]);
    }
    for (Eigen::Index r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      a.row(r).tail(n - col) -= f * a.row(col).tail(n - col);
      b[r] -= f * b[col];
    }
  }
  Eigen::VectorXd x(n);
  for (Eigen::Index r = n - 1; r >= 0; --r) {
    double acc = b[r];
    for (Eigen::Index c = r + 1; c < n; ++c) acc -= a(r, c) * x[c];
    x[r] = acc / a(r, r);
  }
  return x;
}

// Cross-covariances by explicit double loops, 1/(J-1).
inline void cross_cov(const Eigen::MatrixXd& u, const Eigen::MatrixXd& g, Eigen::MatrixXd& c_ug,
                      Eigen::MatrixXd& c_gg) {
  const Eigen::Index j = u.cols();
  const Eigen::VectorXd um = u.rowwise().mean();
  const Eigen::VectorXd gm = g.rowwise().mean();
  c_ug.setZero(u.rows(), g.rows());
  c_gg.setZero(g.rows(), g.rows());
  for (Eigen::Index a = 0; a < u.rows(); ++a)
    for (Eigen::Index b = 0; b < g.rows(); ++b) {
      double acc = 0.0;
      for (Eigen::Index m = 0; m < j; ++m) acc += (u(a, m) - um[a]) * (g(b, m) - gm[b]);
      c_ug(a, b) = acc / static_cast<double>(j - 1);
    }
  for (Eigen::Index a = 0; a < g.rows(); ++a)
    for (Eigen::Index b = 0; b < g.rows(); ++b) {
      double acc = 0.0;
      for (Eigen::Index m = 0; m < j; ++m) acc += (g(a, m) - gm[a]) * (g(b, m) - gm[b]);
      c_gg(a, b) = acc / static_cast<double>(j - 1);
    }
}

// Ridge regression with centered features and an unpenalized intercept,
// solved densely.
struct RidgeFit {
  Eigen::VectorXd w;
  double b = 0.0;
};

inline RidgeFit ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
  const Eigen::Index n = x.rows(), f = x.cols();
  const Eigen::RowVectorXd xm = x.colwise().mean();
  const double ym = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - xm;
  const Eigen::VectorXd yc = y.array() - ym;
  Eigen::MatrixXd a = xc.transpose() * xc;
  a += lambda * Eigen::MatrixXd::Identity(f, f);
  RidgeFit fit;
  fit.w = gauss_solve(a, xc.transpose() * yc);
  fit.b = ym - xm * fit.w;
  (void)n;
  return fit;
}

// Type-7 percentile: linear interpolation of order statistics.
inline double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (p / 100.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// SSIM by brute force: gather every window through reflected indices, take
// plain averages, apply the standard formula.
inline int reflect_index(int t, int n) {
  while (t < 0 || t >= n) {
    if (t < 0) t = -t - 1;
    if (t >= n) t = 2 * n - t - 1;
  }
  return t;
}

inline double ssim_layer(const std::vector<double>& a, const std::vector<double>& b, int nx,
                         int ny, int window, double c1, double c2) {
  const int half = window / 2;
  double total = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      std::vector<double> wa, wb;
      for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) {
          const int ii = reflect_index(i + dx, nx);
          const int jj = reflect_index(j + dy, ny);
          wa.push_back(a[static_cast<std::size_t>(ii + nx * jj)]);
          wb.push_back(b[static_cast<std::size_t>(ii + nx * jj)]);
        }
      const double n = static_cast<double>(wa.size());
      double ma = 0.0, mb = 0.0;
      for (double v : wa) ma += v;
      for (double v : wb) mb += v;
      ma /= n;
      mb /= n;
      double va = 0.0, vb = 0.0, cov = 0.0;
      for (std::size_t t = 0; t < wa.size(); ++t) {
        va += (wa[t] - ma) * (wa[t] - ma);
        vb += (wb[t] - mb) * (wb[t] - mb);
        cov += (wa[t] - ma) * (wb[t] - mb);
      }
      va /= n;
      vb /= n;
      cov /= n;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  return total / static_cast<double>(nx * ny);
}

}  // namespace oracle
