#pragma once

#include <string>
#include <vector>

namespace ib {

// Shortest round-trip decimal form via std::to_chars: the same double always
// prints the same bytes, which is what makes rerun-identical CSVs possible.
std::string format_double(double v);
std::string format_int(long long v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);  // simple unquoted cells

}  // namespace ib
