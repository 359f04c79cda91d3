#pragma once

#include <vector>

#include "reskit/grid.hpp"

namespace reskit {

// Static (rock) part of the face transmissibilities for a 5/7-point stencil,
// in md*ft: T = 0.001127 * (A/d) * harmonic_mean(K_left, K_right).
// Multiplying by a phase mobility (1/cp) and a pressure drop (psi) yields a
// volumetric rate in bbl/day.
struct FaceTransmissibility {
  GridSpec grid;
  std::vector<double> tx;  // size (nx-1)*ny*nz, face between (i,j,k) and (i+1,j,k)
  std::vector<double> ty;  // size nx*(ny-1)*nz
  std::vector<double> tz;  // size nx*ny*(nz-1)

  std::size_t x_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(grid.nx - 1) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(grid.ny) * k);
  }
  std::size_t y_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(grid.nx) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(grid.ny - 1) * k);
  }
  std::size_t z_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(grid.nx) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(grid.ny) * k);
  }
};

double harmonic_mean(double a, double b);

FaceTransmissibility face_transmissibilities(const ScalarField& perm);

}  // namespace reskit
