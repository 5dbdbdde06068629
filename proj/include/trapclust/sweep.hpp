#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace trapclust {

using Cell = std::variant<std::int64_t, double, std::string>;

/// Tabular record of parameter grid points and metrics, emitted as CSV.
struct SweepResult {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

// Shortest round-trip decimal form.
std::string format_number(double x);
std::string format_cell(const Cell& c);

// RFC 4180: CRLF-free, fields quoted when they contain ',', '"' or newlines.
std::string csv_escape(const std::string& field);
void write_csv_header(const std::vector<std::string>& columns, std::ostream& out);
void write_csv_row(const std::vector<Cell>& row, std::ostream& out);
void write_csv(const SweepResult& table, std::ostream& out);

// Parses RFC 4180 text into header and rows of raw strings.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(std::istream& in);

// Inclusive arithmetic grid start, start+step, ..., <= stop (with 1e-9
// relative slack on the end point).
std::vector<double> arithmetic_grid(double start, double stop, double step);

}  // namespace trapclust
