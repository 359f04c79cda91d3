#pragma once

#include <filesystem>
#include <vector>

namespace reskit {

// Tabulated two-phase relative permeability, piecewise linear in Sw.
// Evaluation clamps outside [sw_points.front(), sw_points.back()], so the
// table endpoints define connate water (swc) and residual oil (sor = 1 - last Sw).
class RelPermTable {
 public:
  RelPermTable(std::vector<double> sw, std::vector<double> krw, std::vector<double> kro);

  double krw(double sw) const;
  double kro(double sw) const;
  double swc() const { return sw_.front(); }
  double sor() const { return 1.0 - sw_.back(); }

  // Water fractional flow f_w = (krw/mu_w) / (krw/mu_w + kro/mu_o).
  double fractional_flow(double sw, double mu_w, double mu_o) const;
  // Upper bound on |df_w/dSw|, evaluated segment-wise for the CFL limit.
  double max_fw_derivative(double mu_w, double mu_o) const;

  const std::vector<double>& sw_points() const { return sw_; }
  const std::vector<double>& krw_points() const { return krw_; }
  const std::vector<double>& kro_points() const { return kro_; }

  // Corey-type power-law curves sampled on a uniform grid of n points.
  static RelPermTable corey(double swc, double sor, double krw_end, double kro_end,
                            double nw, double no, int n = 101);

  static RelPermTable load_csv(const std::filesystem::path& path);  // columns sw,krw,kro
  void save_csv(const std::filesystem::path& path) const;

 private:
  double interp(const std::vector<double>& y, double sw) const;

  std::vector<double> sw_;
  std::vector<double> krw_;
  std::vector<double> kro_;
};

}  // namespace reskit
