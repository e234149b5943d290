#include "edgepipe/common/csv.hpp"

#include <charconv>

#include "edgepipe/common/errors.hpp"

namespace edgepipe {

namespace {

// Returns false at end of input.
bool read_record(std::istream& in, CsvRow& out) {
  out.clear();
  int c = in.get();
  if (c == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  auto emit = [&] {
    if (field.empty() && !was_quoted) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(field);
    }
    field.clear();
    was_quoted = false;
  };
  while (true) {
    if (c == std::char_traits<char>::eof()) {
      if (quoted) throw DataError("csv: unterminated quoted field");
      emit();
      return true;
    }
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"' && field.empty()) {
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      emit();
    } else if (ch == '\n') {
      emit();
      return true;
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get();
      emit();
      return true;
    } else {
      field.push_back(ch);
    }
    c = in.get();
  }
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  CsvRow record;
  if (!read_record(in, record)) return table;
  for (auto& cell : record) table.header.push_back(cell.value_or(""));
  while (read_record(in, record)) {
    if (record.size() == 1 && !record[0]) continue;  // blank line
    if (record.size() > table.header.size()) {
      throw DataError("csv: row " + std::to_string(table.rows.size() + 1) + " has " +
                      std::to_string(record.size()) + " fields, header has " +
                      std::to_string(table.header.size()));
    }
    record.resize(table.header.size());
    table.rows.push_back(record);
  }
  return table;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(fields[i]);
  }
  out << '\n';
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace edgepipe
