#include "reskit/transmissibility.hpp"

#include "reskit/errors.hpp"
#include "reskit/units.hpp"

namespace reskit {

double harmonic_mean(double a, double b) {
  if (a <= 0.0 || b <= 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

FaceTransmissibility face_transmissibilities(const ScalarField& perm) {
  const GridSpec& g = perm.grid;
  if (perm.values.size() != g.num_cells()) throw ConfigError("permeability field size mismatch");

  FaceTransmissibility t;
  t.grid = g;
  t.tx.assign(static_cast<std::size_t>(std::max(g.nx - 1, 0)) * g.ny * g.nz, 0.0);
  t.ty.assign(static_cast<std::size_t>(g.nx) * std::max(g.ny - 1, 0) * g.nz, 0.0);
  t.tz.assign(static_cast<std::size_t>(g.nx) * g.ny * std::max(g.nz - 1, 0), 0.0);

  const double gx = units::kDarcy * (g.dy * g.dz) / g.dx;
  const double gy = units::kDarcy * (g.dx * g.dz) / g.dy;
  const double gz = units::kDarcy * (g.dx * g.dy) / g.dz;

  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i + 1 < g.nx; ++i)
        t.tx[t.x_index(i, j, k)] = gx * harmonic_mean(perm.at(i, j, k), perm.at(i + 1, j, k));

  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j + 1 < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        t.ty[t.y_index(i, j, k)] = gy * harmonic_mean(perm.at(i, j, k), perm.at(i, j + 1, k));

  for (int k = 0; k + 1 < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        t.tz[t.z_index(i, j, k)] = gz * harmonic_mean(perm.at(i, j, k), perm.at(i, j, k + 1));

  return t;
}

}  // namespace reskit
