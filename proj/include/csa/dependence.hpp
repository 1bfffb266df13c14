#pragma once

#include "csa/association.hpp"
#include "csa/ingest.hpp"
#include "csa/spatial_order.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace csa {

enum class WeightScheme { lag1_adjacency, exp_decay };
enum class AdjacencyRule { rook, queen };

const char* to_string(WeightScheme scheme);
const char* to_string(AdjacencyRule rule);
WeightScheme parse_weight_scheme(const std::string& text);
AdjacencyRule parse_adjacency_rule(const std::string& text);

struct WeightMatrix {
  Eigen::MatrixXd w;  // zero diagonal, non-negative
  WeightScheme scheme = WeightScheme::lag1_adjacency;
  bool row_standardized = true;
  AdjacencyRule rule = AdjacencyRule::rook;
  double theta = 1.0;
  std::size_t isolated = 0;  // rows left all-zero

  std::size_t size() const { return static_cast<std::size_t>(w.rows()); }
};

/// Scales every non-empty row to sum to one; returns the number of empty rows.
std::size_t row_standardize(Eigen::MatrixXd& w);

/// 1 for lattice neighbours (4-neighbour rook, 8-neighbour queen), row-standardized.
WeightMatrix weights_lag1(const std::vector<GridMeta>& grids,
                          AdjacencyRule rule = AdjacencyRule::rook,
                          const LatticeSpec& lattice = {});

/// exp(-d_ij / theta) on Euclidean (lat, lon) distance in degrees, row-standardized.
WeightMatrix weights_expdecay(const std::vector<GridMeta>& grids, double theta = 1.0);

/// Bergsma's correlation from the V-statistic of the centered distance
/// kernel. Requires t >= 4 and non-constant inputs.
double bergsma_rho(std::span<const double> x, std::span<const double> y);

/// All pairwise Bergsma correlations of a complete matrix, with per-column
/// kernel summaries computed once and pairs spread over `jobs` workers.
AssociationMatrix bergsma_matrix(const StsMatrix& x, unsigned jobs = 1);

/// Reference path: bergsma_rho on every pair independently.
AssociationMatrix bergsma_matrix_naive(const StsMatrix& x);

/// p^-1 * sum_{i<j} (w_ij + w_ji) * m_ij.
double spatial_bergsma(const AssociationMatrix& assoc, const WeightMatrix& w);

double morans_i(std::span<const double> values, const WeightMatrix& w);

struct SbEntry {
  std::string window;
  std::string region;
  WeightScheme scheme = WeightScheme::lag1_adjacency;
  AssociationMethod method = AssociationMethod::bergsma;
  double value = 0.0;
};

struct SbSeries {
  std::vector<SbEntry> entries;
  std::vector<std::string> skipped;  // windows with too few time points
};

/// `window,region,scheme,method,value`
void write_sb_csv(std::ostream& out, const SbSeries& series);
SbSeries read_sb_csv(const std::string& path);

}  // namespace csa
