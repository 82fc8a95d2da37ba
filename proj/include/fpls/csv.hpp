#pragma once

#include <string>
#include <vector>

namespace fpls {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // rectangular, enforced on read
};

// Reads a delimited text file. The primary grammar is RFC 4180 CSV: quoted
// fields, doubled quotes inside quotes, embedded separators and newlines,
// CRLF or LF line ends. When the first line contains no comma the file is
// instead read as whitespace-separated columns (the format the reemployment
// bonus experiment file is distributed in). Ragged rows raise ParseError.
CsvTable read_delimited(const std::string& path);

// Writes rows of already-formatted cells, quoting only where RFC 4180
// requires it.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Shortest decimal string that parses back to exactly `value`. Keeps emitted
// files byte-stable without padding every number to 17 digits.
std::string format_double(double value);

// Strict double parse of a whole field; rejects trailing junk, empty fields,
// and non-finite results.
double parse_double(const std::string& field, const std::string& context);

}  // namespace fpls
