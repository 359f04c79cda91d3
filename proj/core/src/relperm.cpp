#include "reskit/relperm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "reskit/errors.hpp"
#include "reskit/io.hpp"

namespace reskit {

RelPermTable::RelPermTable(std::vector<double> sw, std::vector<double> krw, std::vector<double> kro)
    : sw_(std::move(sw)), krw_(std::move(krw)), kro_(std::move(kro)) {
  if (sw_.size() < 2 || sw_.size() != krw_.size() || sw_.size() != kro_.size())
    throw ConfigError("relperm table needs >= 2 rows of equal length");
  for (size_t i = 0; i < sw_.size(); ++i) {
    if (sw_[i] < 0.0 || sw_[i] > 1.0) throw ConfigError("relperm sw out of [0,1]");
    if (krw_[i] < 0.0 || kro_[i] < 0.0) throw ConfigError("negative relative permeability");
    if (i > 0 && sw_[i] <= sw_[i - 1]) throw ConfigError("relperm sw must increase strictly");
    if (krw_[i] + kro_[i] <= 0.0) throw ConfigError("total relative permeability must stay positive");
  }
}

double RelPermTable::interp(const std::vector<double>& y, double sw) const {
  if (sw <= sw_.front()) return y.front();
  if (sw >= sw_.back()) return y.back();
  const auto it = std::upper_bound(sw_.begin(), sw_.end(), sw);
  const size_t hi = static_cast<size_t>(it - sw_.begin());
  const size_t lo = hi - 1;
  const double t = (sw - sw_[lo]) / (sw_[hi] - sw_[lo]);
  return y[lo] + t * (y[hi] - y[lo]);
}

double RelPermTable::krw(double sw) const { return interp(krw_, sw); }
double RelPermTable::kro(double sw) const { return interp(kro_, sw); }

double RelPermTable::fractional_flow(double sw, double mu_w, double mu_o) const {
  const double lw = krw(sw) / mu_w;
  const double lo = kro(sw) / mu_o;
  return lw / (lw + lo);
}

double RelPermTable::max_fw_derivative(double mu_w, double mu_o) const {
  // Within a segment krw and kro are linear, so the numerator of
  // f' = (krw' kro - krw kro')/(mu_w mu_o (lw+lo)^2) ... reduces to a constant
  // per segment and the denominator is minimized at a segment endpoint.
  double best = 0.0;
  for (size_t s = 0; s + 1 < sw_.size(); ++s) {
    const double dsw = sw_[s + 1] - sw_[s];
    const double dlw = (krw_[s + 1] - krw_[s]) / mu_w / dsw;
    const double dlo = (kro_[s + 1] - kro_[s]) / mu_o / dsw;
    const double lw0 = krw_[s] / mu_w, lo0 = kro_[s] / mu_o;
    const double lw1 = krw_[s + 1] / mu_w, lo1 = kro_[s + 1] / mu_o;
    const double numerator = dlw * lo0 - lw0 * dlo;  // constant along the segment
    const double m_min = std::min(lw0 + lo0, lw1 + lo1);
    best = std::max(best, std::abs(numerator) / (m_min * m_min));
  }
  return best;
}

RelPermTable RelPermTable::corey(double swc, double sor, double krw_end, double kro_end,
                                 double nw, double no, int n) {
  if (n < 2) throw ConfigError("corey table needs n >= 2");
  if (swc < 0.0 || sor < 0.0 || swc + sor >= 1.0) throw ConfigError("invalid corey saturations");
  std::vector<double> sw(n), krw(n), kro(n);
  const double span = 1.0 - swc - sor;
  for (int i = 0; i < n; ++i) {
    const double se = static_cast<double>(i) / (n - 1);
    sw[i] = swc + se * span;
    krw[i] = krw_end * std::pow(se, nw);
    kro[i] = kro_end * std::pow(1.0 - se, no);
  }
  return RelPermTable(std::move(sw), std::move(krw), std::move(kro));
}

RelPermTable RelPermTable::load_csv(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  const int c_sw = table.column("sw"), c_krw = table.column("krw"), c_kro = table.column("kro");
  if (c_sw < 0 || c_krw < 0 || c_kro < 0)
    throw DataError("relperm csv needs columns sw,krw,kro: " + path.string());
  std::vector<double> sw, krw, kro;
  for (const auto& row : table.rows) {
    sw.push_back(std::stod(row[c_sw]));
    krw.push_back(std::stod(row[c_krw]));
    kro.push_back(std::stod(row[c_kro]));
  }
  return RelPermTable(std::move(sw), std::move(krw), std::move(kro));
}

void RelPermTable::save_csv(const std::filesystem::path& path) const {
  io::CsvTable table;
  table.header = {"sw", "krw", "kro"};
  for (size_t i = 0; i < sw_.size(); ++i)
    table.rows.push_back({io::format_double(sw_[i]), io::format_double(krw_[i]), io::format_double(kro_[i])});
  io::write_csv(path, table);
}

}  // namespace reskit
