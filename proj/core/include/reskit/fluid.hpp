#pragma once

namespace reskit {

// Incompressible two-phase fluid (viscosities in cp).
struct FluidModel {
  double mu_w = 1.0;
  double mu_o = 2.0;
};

}  // namespace reskit
