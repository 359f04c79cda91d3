#pragma once

// Field units are used throughout the library: length ft, pressure psia,
// permeability md, viscosity cp, volume STB (stock-tank barrel), time days.

namespace reskit::units {

// Darcy constant for field units: md * ft * psi / cp -> STB/day.
// Single definition site; every transmissibility and well-index term
// picks it up from here.
inline constexpr double kDarcy = 0.001127;

// Cubic feet per stock-tank barrel.
inline constexpr double kFt3PerBbl = 5.615;

}  // namespace reskit::units
