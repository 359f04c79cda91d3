#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace reskit::io {

// Shortest round-trippable decimal representation (printf %.17g).
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

// Whitespace-separated doubles; throws DataError on malformed input.
std::vector<double> parse_doubles(const std::string& text);

// Minimal CSV: no quoting, fields must not contain commas or newlines.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

}  // namespace reskit::io
