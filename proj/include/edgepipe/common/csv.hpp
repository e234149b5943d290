#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace edgepipe {

// Cells are std::nullopt when the field is empty and unquoted.
using CsvRow = std::vector<std::optional<std::string>>;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
// newlines. Rows shorter than the header are padded with nulls.
CsvTable read_csv(std::istream& in);

std::string csv_escape(const std::string& field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

// Shortest representation that round-trips the double exactly.
std::string format_double(double v);

}  // namespace edgepipe
