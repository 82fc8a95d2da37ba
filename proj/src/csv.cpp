#include "fpls/csv.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fpls/errors.hpp"

namespace fpls {

namespace {

// RFC 4180 field scanner over the whole file contents. Emits one row per
// record; quoted fields may contain commas, quotes (doubled) and newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t line = 1;

  auto end_field = [&]() {
    row.push_back(field);
    field.clear();
    field_was_quoted = false;
  };
  auto end_row = [&]() {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw ParseError(path + ":" + std::to_string(line) +
                           ": quote inside unquoted field");
        }
        in_quotes = true;
        field_was_quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;  // swallowed by \n
        ++line;
        end_row();
        break;
      case '\n':
        ++line;
        end_row();
        break;
      default:
        field += c;
    }
  }
  if (in_quotes) {
    throw ParseError(path + ": unterminated quoted field");
  }
  if (!field.empty() || field_was_quoted || !row.empty()) end_row();
  return rows;
}

std::vector<std::vector<std::string>> parse_whitespace(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream lines(text);
  std::string ln;
  while (std::getline(lines, ln)) {
    if (!ln.empty() && ln.back() == '\r') ln.pop_back();
    std::istringstream cells(ln);
    std::vector<std::string> row;
    std::string cell;
    while (cells >> cell) row.push_back(cell);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

bool needs_quoting(const std::string& field) {
  return field.find_first_of(",\"\n\r") != std::string::npos;
}

}  // namespace

CsvTable read_delimited(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  // Delimiter sniff on the first line only.
  const std::size_t eol = text.find('\n');
  const std::string first = text.substr(0, eol == std::string::npos ? text.size() : eol);
  const bool comma = first.find(',') != std::string::npos;

  std::vector<std::vector<std::string>> rows =
      comma ? parse_csv(text, path) : parse_whitespace(text);
  if (rows.empty()) throw EmptyDataError(path + ": no rows");

  CsvTable table;
  table.header = std::move(rows.front());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != table.header.size()) {
      throw ParseError(path + ": row " + std::to_string(r + 1) + " has " +
                       std::to_string(rows[r].size()) + " fields, header has " +
                       std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(rows[r]));
  }
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  auto write_row = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      if (needs_quoting(row[i])) {
        out << '"';
        for (char c : row[i]) {
          if (c == '"') out << '"';
          out << c;
        }
        out << '"';
      } else {
        out << row[i];
      }
    }
    out << '\n';
  };
  write_row(header);
  for (const auto& row : rows) {
    if (row.size() != header.size()) {
      throw ShapeError(path + ": row width does not match header");
    }
    write_row(row);
  }
  if (!out) throw DataError("write failed: " + path);
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
    if (std::strtod(buf, nullptr) == value) return buf;
  }
  return buf;
}

double parse_double(const std::string& field, const std::string& context) {
  if (field.empty()) throw ParseError(context + ": empty numeric field");
  const char* begin = field.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end != begin + field.size()) {
    throw ParseError(context + ": not a number: '" + field + "'");
  }
  if (!std::isfinite(value)) {
    throw ParseError(context + ": non-finite value: '" + field + "'");
  }
  return value;
}

}  // namespace fpls
