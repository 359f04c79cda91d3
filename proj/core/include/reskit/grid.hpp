#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace reskit {

// Structured corner-less grid with uniform cell sizes (field units: ft).
// Cells are indexed x-fastest: id = i + nx*(j + ny*k).
struct GridSpec {
  int nx = 1;
  int ny = 1;
  int nz = 1;
  double dx = 1.0;
  double dy = 1.0;
  double dz = 1.0;
  double depth = 0.0;  // top-layer datum depth, ft

  std::size_t num_cells() const { return static_cast<std::size_t>(nx) * ny * nz; }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(nx) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(ny) * k);
  }
  bool contains(int i, int j, int k) const {
    return i >= 0 && i < nx && j >= 0 && j < ny && k >= 0 && k < nz;
  }
  double cell_volume() const { return dx * dy * dz; }  // ft^3

  bool operator==(const GridSpec&) const = default;
};

// Per-cell scalar, stored in grid index order.
struct ScalarField {
  GridSpec grid;
  std::vector<double> values;

  ScalarField() = default;
  ScalarField(const GridSpec& g, double fill = 0.0) : grid(g), values(g.num_cells(), fill) {}

  double& at(int i, int j, int k) { return values[grid.index(i, j, k)]; }
  double at(int i, int j, int k) const { return values[grid.index(i, j, k)]; }

  double min() const;
  double max() const;
  double mean() const;
};

// Text format: first line "nx ny nz", then nx*ny*nz whitespace-separated
// values in x-fastest order. Cell sizes travel in config, not in the field file.
ScalarField read_field(const std::filesystem::path& path, const GridSpec& grid);
void write_field(const std::filesystem::path& path, const ScalarField& field);

}  // namespace reskit
