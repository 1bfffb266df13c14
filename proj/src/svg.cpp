#include "csa/svg.hpp"

#include "csa/csv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace csa::svg {

namespace {

constexpr std::array<int, 3> kNegative{33, 102, 172};   // #2166ac
constexpr std::array<int, 3> kMiddle{247, 247, 247};    // #f7f7f7
constexpr std::array<int, 3> kPositive{178, 24, 43};    // #b2182b

constexpr std::array<const char*, 6> kLineColors{"#1b9e77", "#d95f02", "#7570b3",
                                                 "#e7298a", "#66a61e", "#e6ab02"};

std::string escape(const std::string& text) {
  std::string out;
  for (const char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string hex(const std::array<int, 3>& rgb) {
  char buffer[8];
  std::snprintf(buffer, sizeof(buffer), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buffer;
}

}  // namespace

std::string diverging_color(double value) {
  if (!std::isfinite(value)) return "#808080";
  const double v = std::clamp(value, -1.0, 1.0);
  const auto& end = v < 0.0 ? kNegative : kPositive;
  const double t = std::abs(v);
  std::array<int, 3> rgb{};
  for (std::size_t k = 0; k < 3; ++k) {
    rgb[k] = static_cast<int>(std::lround(kMiddle[k] + t * (end[k] - kMiddle[k])));
  }
  return hex(rgb);
}

void heatmap(std::ostream& out, const Eigen::MatrixXd& m, const std::string& title) {
  const Eigen::Index p = m.rows();
  const double cell = p > 0 ? std::max(1.0, 560.0 / static_cast<double>(p)) : 1.0;
  const double side = cell * static_cast<double>(p);
  const double width = side + 120.0, height = side + 60.0;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << csv::format(width)
      << "\" height=\"" << csv::format(height) << "\" shape-rendering=\"crispEdges\">\n";
  out << "<text x=\"10\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" << escape(title)
      << "</text>\n<g transform=\"translate(10,40)\">\n";
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << "<rect x=\"" << csv::format(cell * static_cast<double>(j)) << "\" y=\""
          << csv::format(cell * static_cast<double>(i)) << "\" width=\"" << csv::format(cell)
          << "\" height=\"" << csv::format(cell) << "\" fill=\"" << diverging_color(m(i, j))
          << "\"/>\n";
    }
  }
  out << "</g>\n";
  // Colour bar for the fixed domain.
  const double bar_x = side + 40.0;
  for (int k = 0; k < 20; ++k) {
    const double v = 1.0 - (k + 0.5) / 10.0;
    out << "<rect x=\"" << csv::format(bar_x) << "\" y=\"" << csv::format(40.0 + k * side / 20.0)
        << "\" width=\"20\" height=\"" << csv::format(side / 20.0) << "\" fill=\""
        << diverging_color(v) << "\"/>\n";
  }
  out << "<text x=\"" << csv::format(bar_x + 24) << "\" y=\"50\" font-family=\"sans-serif\" font-size=\"11\">1</text>\n";
  out << "<text x=\"" << csv::format(bar_x + 24) << "\" y=\"" << csv::format(40.0 + side)
      << "\" font-family=\"sans-serif\" font-size=\"11\">-1</text>\n";
  out << "</svg>\n";
}

void line_chart(std::ostream& out, const std::vector<std::string>& x_labels,
                const std::vector<Line>& lines, const std::string& title) {
  const double width = 720.0, height = 400.0;
  const double left = 60.0, right = 160.0, top = 40.0, bottom = 50.0;
  const double plot_w = width - left - right, plot_h = height - top - bottom;

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& line : lines) {
    for (const double y : line.y) {
      if (!std::isfinite(y)) continue;
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  const std::size_t n = x_labels.size();
  auto x_of = [&](std::size_t i) {
    return left + (n > 1 ? plot_w * static_cast<double>(i) / static_cast<double>(n - 1) : plot_w / 2);
  };
  auto y_of = [&](double y) { return top + plot_h * (hi - y) / (hi - lo); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << csv::format(width)
      << "\" height=\"" << csv::format(height) << "\">\n";
  out << "<text x=\"10\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" << escape(title) << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  out << "<text x=\"" << left - 6 << "\" y=\"" << top + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << csv::format(hi) << "</text>\n";
  out << "<text x=\"" << left - 6 << "\" y=\"" << top + plot_h
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << csv::format(lo) << "</text>\n";
  if (n > 0) {
    out << "<text x=\"" << left << "\" y=\"" << height - 20
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(x_labels.front()) << "</text>\n";
    out << "<text x=\"" << left + plot_w << "\" y=\"" << height - 20
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << escape(x_labels.back())
        << "</text>\n";
  }
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const char* color = kLineColors[k % kLineColors.size()];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < std::min(n, lines[k].y.size()); ++i) {
      if (!std::isfinite(lines[k].y[i])) continue;
      out << (first ? "" : " ") << csv::format(x_of(i)) << ',' << csv::format(y_of(lines[k].y[i]));
      first = false;
    }
    out << "\"/>\n";
    out << "<text x=\"" << width - right + 10 << "\" y=\"" << top + 16.0 * static_cast<double>(k + 1)
        << "\" fill=\"" << color << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(lines[k].name)
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace csa::svg
