#include "trapclust/sweep.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "trapclust/errors.hpp"

namespace trapclust {

std::size_t SweepResult::column(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == name) return c;
  }
  throw ValidationError("no column '" + name + "'");
}

double SweepResult::number(std::size_t row, const std::string& name) const {
  const Cell& cell = rows.at(row).at(column(name));
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&cell)) return *d;
  throw ValidationError("column '" + name + "' is not numeric");
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string format_cell(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  return std::get<std::string>(c);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

void write_csv_header(const std::vector<std::string>& columns, std::ostream& out) {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c) out << ',';
    out << csv_escape(columns[c]);
  }
  out << '\n';
}

void write_csv_row(const std::vector<Cell>& row, std::ostream& out) {
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (c) out << ',';
    out << csv_escape(format_cell(row[c]));
  }
  out << '\n';
}

void write_csv(const SweepResult& table, std::ostream& out) {
  write_csv_header(table.columns, out);
  for (const auto& row : table.rows) write_csv_row(row, out);
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    if (table.header.empty()) {
      table.header = std::move(record);
    } else {
      table.rows.push_back(std::move(record));
    }
    record.clear();
    any = false;
  };
  for (int ch; (ch = in.get()) != EOF;) {
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field += static_cast<char>(ch);
      }
      continue;
    }
    any = true;
    if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      record.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      end_record();
    } else if (ch != '\r') {
      field += static_cast<char>(ch);
    }
  }
  if (quoted) throw ParseError(0, "unterminated quoted CSV field");
  if (any) end_record();
  return table;
}

std::vector<double> arithmetic_grid(double start, double stop, double step) {
  if (!(step > 0.0) && start != stop) throw ValidationError("grid step must be positive");
  std::vector<double> out;
  if (start == stop) return {start};
  const double span = stop - start;
  if (span < 0.0) throw ValidationError("grid stop precedes start");
  const auto count = static_cast<std::int64_t>(std::floor(span / step * (1.0 + 1e-9) + 1e-9));
  for (std::int64_t i = 0; i <= count; ++i) out.push_back(start + static_cast<double>(i) * step);
  return out;
}

}  // namespace trapclust
