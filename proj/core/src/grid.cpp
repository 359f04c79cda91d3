#include "reskit/grid.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "reskit/errors.hpp"
#include "reskit/io.hpp"

namespace reskit {

double ScalarField::min() const {
  return *std::min_element(values.begin(), values.end());
}

double ScalarField::max() const {
  return *std::max_element(values.begin(), values.end());
}

double ScalarField::mean() const {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

ScalarField read_field(const std::filesystem::path& path, const GridSpec& grid) {
  const std::string text = io::read_text_file(path);
  const auto nums = io::parse_doubles(text);
  if (nums.size() != grid.num_cells() + 3)
    throw DataError("field file " + path.string() + ": expected header + " +
                    std::to_string(grid.num_cells()) + " values, got " + std::to_string(nums.size()) + " tokens");
  if (static_cast<int>(nums[0]) != grid.nx || static_cast<int>(nums[1]) != grid.ny ||
      static_cast<int>(nums[2]) != grid.nz)
    throw DataError("field file " + path.string() + ": dimensions do not match grid");
  ScalarField field(grid);
  std::copy(nums.begin() + 3, nums.end(), field.values.begin());
  return field;
}

void write_field(const std::filesystem::path& path, const ScalarField& field) {
  std::ostringstream ss;
  ss << field.grid.nx << ' ' << field.grid.ny << ' ' << field.grid.nz << '\n';
  const std::size_t per_row = static_cast<std::size_t>(field.grid.nx);
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    ss << io::format_double(field.values[i]);
    ss << (((i + 1) % per_row == 0) ? '\n' : ' ');
  }
  io::write_text_file(path, ss.str());
}

}  // namespace reskit
