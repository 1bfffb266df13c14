#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace csa::svg {

/// Diverging blue-white-red colour for a value on the fixed [-1, 1] domain.
std::string diverging_color(double value);

/// One square cell per matrix entry, values clamped to [-1, 1].
void heatmap(std::ostream& out, const Eigen::MatrixXd& m, const std::string& title);

struct Line {
  std::string name;
  std::vector<double> y;  // one value per x label
};

void line_chart(std::ostream& out, const std::vector<std::string>& x_labels,
                const std::vector<Line>& lines, const std::string& title);

}  // namespace csa::svg
