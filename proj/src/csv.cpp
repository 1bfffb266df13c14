#include "csa/csv.hpp"

#include "csa/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

namespace csa::csv {

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::optional<std::size_t> Table::find(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open '" + path + "'");
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      fail(ErrorKind::parse, path + ":" + std::to_string(line_no) + ": expected " +
                                 std::to_string(table.header.size()) + " fields, got " +
                                 std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) fail(ErrorKind::parse, path + ": missing header");
  return table;
}

double parse_double(std::string_view text, const std::string& context) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    fail(ErrorKind::parse, context + ": not a finite number: '" + std::string(text) + "'");
  }
  return value;
}

long long parse_int(std::string_view text, const std::string& context) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorKind::parse, context + ": not an integer: '" + std::string(text) + "'");
  }
  return value;
}

std::string format(double value) {
  if (std::isnan(value)) return "NaN";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  if (value == 0.0) return "0";  // folds -0
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    const bool needs_quotes = fields[i].find_first_of(",\"") != std::string::npos;
    if (!needs_quotes) {
      out += fields[i];
      continue;
    }
    out.push_back('"');
    for (char c : fields[i]) {
      if (c == '"') out.push_back('"');
      out.push_back(c);
    }
    out.push_back('"');
  }
  return out;
}

void write_square(std::ostream& out, const Eigen::MatrixXd& m,
                  const std::vector<std::string>& ids) {
  std::vector<std::string> row{"grid_id"};
  row.insert(row.end(), ids.begin(), ids.end());
  out << join(row) << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    row.assign(1, ids[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(format(m(i, j)));
    out << join(row) << '\n';
  }
}

SquareMatrix read_square(const std::string& path) {
  const Table table = read(path);
  SquareMatrix result;
  result.ids.assign(table.header.begin() + 1, table.header.end());
  const auto p = static_cast<Eigen::Index>(result.ids.size());
  if (static_cast<Eigen::Index>(table.rows.size()) != p) {
    fail(ErrorKind::structural, path + ": matrix is not square");
  }
  result.m.resize(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < p; ++j) {
      result.m(i, j) = parse_double(row[static_cast<std::size_t>(j + 1)], path);
    }
  }
  return result;
}

}  // namespace csa::csv
