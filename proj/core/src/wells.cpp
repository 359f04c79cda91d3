#include "reskit/wells.hpp"

#include <cmath>
#include <set>

#include "reskit/errors.hpp"
#include "reskit/units.hpp"

namespace reskit {

double peaceman_equivalent_radius(double dx, double dy) {
  return 0.14 * std::sqrt(dx * dx + dy * dy);
}

double peaceman_well_index(double perm, double dz, double dx, double dy,
                           double wellbore_radius, double skin) {
  const double re = peaceman_equivalent_radius(dx, dy);
  const double denom = std::log(re / wellbore_radius) + skin;
  if (denom <= 0.0) throw ConfigError("peaceman well index: ln(re/rw) + skin must be positive");
  return perm * dz / denom;
}

double peaceman_rate(double well_index, double lambda, double p_cell, double p_bhp) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  return units::kDarcy * two_pi * well_index * lambda * (p_cell - p_bhp);
}

void validate_wells(const GridSpec& grid, const std::vector<WellSpec>& wells) {
  std::set<std::string> names;
  for (const auto& w : wells) {
    if (w.name.empty()) throw ConfigError("well with empty name");
    if (!names.insert(w.name).second) throw ConfigError("duplicate well name: " + w.name);
    if (w.k0 > w.k1) throw ConfigError("well " + w.name + ": k0 > k1");
    if (!grid.contains(w.i, w.j, w.k0) || !grid.contains(w.i, w.j, w.k1))
      throw ConfigError("well " + w.name + " completed outside grid");
    if (w.wellbore_radius <= 0.0) throw ConfigError("well " + w.name + ": wellbore radius <= 0");
    if (w.kind == WellKind::Injector && w.control == WellControl::Rate && w.target < 0.0)
      throw ConfigError("well " + w.name + ": injection rate must be >= 0");
  }
}

}  // namespace reskit
