#pragma once

#include <string>
#include <vector>

#include "reskit/grid.hpp"

namespace reskit {

enum class WellKind { Injector, Producer };
enum class WellControl { Rate, Bhp };

// Vertical well completed over layers [k0, k1] of cell column (i, j).
struct WellSpec {
  std::string name;
  WellKind kind = WellKind::Producer;
  int i = 0;
  int j = 0;
  int k0 = 0;
  int k1 = 0;
  WellControl control = WellControl::Bhp;
  double target = 0.0;            // STB/day for Rate, psia for Bhp
  double wellbore_radius = 0.25;  // ft
  double skin = 0.0;

  int num_layers() const { return k1 - k0 + 1; }
};

// Peaceman well index K*h / (ln(re/rw) + s) in md*ft, with the isotropic
// equivalent radius re = 0.14*sqrt(dx^2 + dy^2).
double peaceman_equivalent_radius(double dx, double dy);
double peaceman_well_index(double perm, double dz, double dx, double dy,
                           double wellbore_radius, double skin);

// Phase rates at the sandface in STB/day; positive = production.
// lambda is a phase mobility kr/mu (1/cp).
double peaceman_rate(double well_index, double lambda, double p_cell, double p_bhp);

struct WellRates {
  std::string well;
  double oil_stb_d = 0.0;
  double water_stb_d = 0.0;  // negative for injection
  double water_cut = 0.0;    // 0 when both phase rates are 0
  double bhp_psia = 0.0;
};

void validate_wells(const GridSpec& grid, const std::vector<WellSpec>& wells);

}  // namespace reskit
