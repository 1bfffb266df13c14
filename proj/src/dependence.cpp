#include "csa/dependence.hpp"

#include "csa/csv.hpp"
#include "csa/error.hpp"
#include "csa/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

namespace csa {

namespace {

// Centered values and distance row means a_i = t^-1 sum_k |x_i - x_k| of one
// variable, plus the grand mean of all distances.
struct Kernel {
  std::vector<double> x;
  std::vector<double> row_mean;
  double grand_mean = 0.0;
};

Kernel make_kernel(std::span<const double> values) {
  const std::size_t t = values.size();
  Kernel k;
  const double centre = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(t);
  k.x.resize(t);
  for (std::size_t i = 0; i < t; ++i) k.x[i] = values[i] - centre;

  std::vector<std::size_t> order(t);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return k.x[a] < k.x[b]; });
  double total = 0.0;
  for (const double v : k.x) total += v;
  k.row_mean.resize(t);
  double below = 0.0;  // sum of values ranked before r
  for (std::size_t r = 0; r < t; ++r) {
    const double v = k.x[order[r]];
    const double above = total - below - v;
    const double sum = v * static_cast<double>(r) - below + above -
                       v * static_cast<double>(t - r - 1);
    k.row_mean[order[r]] = sum / static_cast<double>(t);
    below += v;
  }
  k.grand_mean = std::accumulate(k.row_mean.begin(), k.row_mean.end(), 0.0) / static_cast<double>(t);
  return k;
}

// sum_{i,j} A_ij B_ij for the double-centered distance matrices A and B,
// expanded as sum d^x d^y - 2t sum a_i b_i + t^2 abar bbar.
double centered_product(const Kernel& a, const Kernel& b) {
  const std::size_t t = a.x.size();
  const double* x = a.x.data();
  const double* y = b.x.data();
  double cross = 0.0;
  for (std::size_t i = 0; i + 1 < t; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    double row = 0.0;
    for (std::size_t j = i + 1; j < t; ++j) row += std::abs(xi - x[j]) * std::abs(yi - y[j]);
    cross += row;
  }
  double means = 0.0;
  for (std::size_t i = 0; i < t; ++i) means += a.row_mean[i] * b.row_mean[i];
  const double td = static_cast<double>(t);
  return 2.0 * cross - 2.0 * td * means + td * td * a.grand_mean * b.grand_mean;
}

void check_bergsma_input(std::span<const double> v, const std::string& name) {
  if (v.size() < 4) {
    fail(ErrorKind::insufficient_data, "bergsma: " + name + " has " + std::to_string(v.size()) +
                                           " observations, need at least 4");
  }
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (!(*hi > *lo)) fail(ErrorKind::zero_variance, "bergsma: " + name + " is constant");
}

double normalized(double cross, double xx, double yy) {
  const double rho = cross / std::sqrt(xx * yy);
  return std::clamp(rho, -1.0, 1.0);
}

std::vector<GridMeta> check_pairwise_input(const StsMatrix& x) {
  if (x.has_missing()) fail(ErrorKind::completeness, "bergsma_matrix: input has masked entries");
  return x.columns;
}

}  // namespace

const char* to_string(WeightScheme scheme) {
  return scheme == WeightScheme::lag1_adjacency ? "lag1" : "expdecay";
}

const char* to_string(AdjacencyRule rule) { return rule == AdjacencyRule::rook ? "rook" : "queen"; }

WeightScheme parse_weight_scheme(const std::string& text) {
  if (text == "lag1" || text == "lag1_adjacency") return WeightScheme::lag1_adjacency;
  if (text == "expdecay" || text == "exp_decay") return WeightScheme::exp_decay;
  fail(ErrorKind::config, "unknown weight scheme '" + text + "'");
}

AdjacencyRule parse_adjacency_rule(const std::string& text) {
  if (text == "rook") return AdjacencyRule::rook;
  if (text == "queen") return AdjacencyRule::queen;
  fail(ErrorKind::config, "unknown adjacency rule '" + text + "'");
}

std::size_t row_standardize(Eigen::MatrixXd& w) {
  std::size_t empty = 0;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    const double sum = w.row(i).sum();
    if (sum > 0.0) {
      w.row(i) /= sum;
    } else {
      ++empty;
    }
  }
  return empty;
}

WeightMatrix weights_lag1(const std::vector<GridMeta>& grids, AdjacencyRule rule,
                          const LatticeSpec& lattice) {
  const auto cells = quantize_lattice(grids, lattice);
  std::map<LatticeCell, Eigen::Index> index;
  for (std::size_t i = 0; i < cells.size(); ++i) index.emplace(cells[i], static_cast<Eigen::Index>(i));

  const auto p = static_cast<Eigen::Index>(grids.size());
  WeightMatrix out;
  out.scheme = WeightScheme::lag1_adjacency;
  out.rule = rule;
  out.w = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const LatticeCell c = cells[static_cast<std::size_t>(i)];
    for (long dr = -1; dr <= 1; ++dr) {
      for (long dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        if (rule == AdjacencyRule::rook && dr != 0 && dc != 0) continue;
        const auto it = index.find(LatticeCell{c.row + dr, c.col + dc});
        if (it != index.end()) out.w(i, it->second) = 1.0;
      }
    }
  }
  out.isolated = row_standardize(out.w);
  out.row_standardized = true;
  return out;
}

WeightMatrix weights_expdecay(const std::vector<GridMeta>& grids, double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    fail(ErrorKind::argument, "weights_expdecay: theta must be positive and finite");
  }
  const auto p = static_cast<Eigen::Index>(grids.size());
  WeightMatrix out;
  out.scheme = WeightScheme::exp_decay;
  out.theta = theta;
  out.w = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      const auto& a = grids[static_cast<std::size_t>(i)];
      const auto& b = grids[static_cast<std::size_t>(j)];
      const double d = std::hypot(a.lat - b.lat, a.lon - b.lon);
      if (d == 0.0) {
        fail(ErrorKind::coincident_location,
             "grids '" + a.grid_id + "' and '" + b.grid_id + "' share a location");
      }
      out.w(i, j) = out.w(j, i) = std::exp(-d / theta);
    }
  }
  out.isolated = row_standardize(out.w);
  out.row_standardized = true;
  return out;
}

double bergsma_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    fail(ErrorKind::structural, "bergsma: lengths differ (" + std::to_string(x.size()) + " vs " +
                                    std::to_string(y.size()) + ")");
  }
  check_bergsma_input(x, "x");
  check_bergsma_input(y, "y");
  const Kernel kx = make_kernel(x);
  const Kernel ky = make_kernel(y);
  const double xx = centered_product(kx, kx);
  const double yy = centered_product(ky, ky);
  return normalized(centered_product(kx, ky), xx, yy);
}

AssociationMatrix bergsma_matrix(const StsMatrix& x, unsigned jobs) {
  const auto columns = check_pairwise_input(x);
  const auto p = static_cast<std::size_t>(x.values.cols());
  const auto t = static_cast<std::size_t>(x.values.rows());

  std::vector<Kernel> kernels(p);
  std::vector<double> self(p);
  parallel_for(p, jobs, [&](std::size_t j) {
    const std::span<const double> column(x.values.col(static_cast<Eigen::Index>(j)).data(), t);
    check_bergsma_input(column, "column '" + columns[j].grid_id + "'");
    kernels[j] = make_kernel(column);
    self[j] = centered_product(kernels[j], kernels[j]);
  });

  AssociationMatrix out;
  out.method = AssociationMethod::bergsma;
  for (const auto& g : columns) out.grid_ids.push_back(g.grid_id);
  out.m = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));

  // Pair list in row-major upper-triangle order.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(p * (p - 1) / 2);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) pairs.emplace_back(i, j);
  }
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    values[k] = normalized(centered_product(kernels[i], kernels[j]), self[i], self[j]);
  });
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(pairs[k].first);
    const auto j = static_cast<Eigen::Index>(pairs[k].second);
    out.m(i, j) = out.m(j, i) = values[k];
  }
  return out;
}

AssociationMatrix bergsma_matrix_naive(const StsMatrix& x) {
  const auto columns = check_pairwise_input(x);
  const Eigen::Index p = x.values.cols();
  const auto t = static_cast<std::size_t>(x.values.rows());
  AssociationMatrix out;
  out.method = AssociationMethod::bergsma;
  for (const auto& g : columns) out.grid_ids.push_back(g.grid_id);
  out.m = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      double rho = 0.0;
      try {
        rho = bergsma_rho(std::span<const double>(x.values.col(i).data(), t),
                          std::span<const double>(x.values.col(j).data(), t));
      } catch (const Error& e) {
        throw Error(e.kind(), "pair (" + columns[static_cast<std::size_t>(i)].grid_id + ", " +
                                  columns[static_cast<std::size_t>(j)].grid_id + "): " + e.what());
      }
      out.m(i, j) = out.m(j, i) = rho;
    }
  }
  return out;
}

double spatial_bergsma(const AssociationMatrix& assoc, const WeightMatrix& w) {
  if (assoc.m.rows() != w.w.rows() || assoc.m.cols() != w.w.cols() ||
      assoc.m.rows() != assoc.m.cols()) {
    fail(ErrorKind::structural, "spatial_bergsma: association is " +
                                    std::to_string(assoc.m.rows()) + "x" +
                                    std::to_string(assoc.m.cols()) + ", weights " +
                                    std::to_string(w.w.rows()) + "x" + std::to_string(w.w.cols()));
  }
  const Eigen::Index p = assoc.m.rows();
  if (p == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) sum += (w.w(i, j) + w.w(j, i)) * assoc.m(i, j);
  }
  return sum / static_cast<double>(p);
}

double morans_i(std::span<const double> values, const WeightMatrix& w) {
  const auto p = values.size();
  if (static_cast<std::size_t>(w.w.rows()) != p || static_cast<std::size_t>(w.w.cols()) != p) {
    fail(ErrorKind::structural, "morans_i: " + std::to_string(p) + " values for a " +
                                    std::to_string(w.w.rows()) + "x" + std::to_string(w.w.cols()) +
                                    " weight matrix");
  }
  const double total = w.w.sum();
  if (!(total > 0.0)) fail(ErrorKind::empty_weights, "morans_i: all weights are zero");
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(p);
  std::vector<double> z(p);
  double ss = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    z[i] = values[i] - mean;
    ss += z[i] * z[i];
  }
  if (!(ss > 0.0)) fail(ErrorKind::zero_variance, "morans_i: values are constant");
  double cross = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      cross += w.w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * z[i] * z[j];
    }
  }
  return static_cast<double>(p) / total * cross / ss;
}

void write_sb_csv(std::ostream& out, const SbSeries& series) {
  out << "window,region,scheme,method,value\n";
  for (const auto& e : series.entries) {
    out << csv::join({e.window, e.region, to_string(e.scheme), to_string(e.method),
                      csv::format(e.value)})
        << '\n';
  }
}

SbSeries read_sb_csv(const std::string& path) {
  const csv::Table table = csv::read(path);
  const auto window = table.find("window");
  const auto region = table.find("region");
  const auto scheme = table.find("scheme");
  const auto method = table.find("method");
  const auto value = table.find("value");
  if (!window || !region || !scheme || !method || !value) {
    fail(ErrorKind::parse, path + ": header must be window,region,scheme,method,value");
  }
  SbSeries series;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    series.entries.push_back(SbEntry{row[*window], row[*region], parse_weight_scheme(row[*scheme]),
                                     parse_association_method(row[*method]),
                                     csv::parse_double(row[*value], path + ":" +
                                                       std::to_string(table.line_numbers[r]))});
  }
  return series;
}

}  // namespace csa
