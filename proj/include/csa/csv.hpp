#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace csa::csv {

/// Splits one CSV record. Double-quoted fields may contain commas.
std::vector<std::string> split(std::string_view line);

/// Reads every non-empty record; the first one is the header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based, per row

  /// Index of a header column, or nullopt.
  std::optional<std::size_t> find(std::string_view name) const;
};

Table read(const std::string& path);

/// Strict decimal parse; throws a parse error mentioning `context`.
double parse_double(std::string_view text, const std::string& context);
long long parse_int(std::string_view text, const std::string& context);

/// Shortest round-trip representation.
std::string format(double value);

std::string join(const std::vector<std::string>& fields);

/// Square matrix with a grid-id header row and a grid-id first column.
void write_square(std::ostream& out, const Eigen::MatrixXd& m,
                  const std::vector<std::string>& ids);

struct SquareMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd m;
};

SquareMatrix read_square(const std::string& path);

}  // namespace csa::csv
