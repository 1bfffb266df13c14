#pragma once

// Synthetic spatial time series with known planted structure.

#include "support.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "csa/csv.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

namespace csa::testing {

/// exp(-distance / range) correlation between lattice grids.
inline Eigen::MatrixXd exp_correlation(const std::vector<GridMeta>& grids, double range) {
  const auto p = static_cast<Eigen::Index>(grids.size());
  Eigen::MatrixXd c(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto& a = grids[static_cast<std::size_t>(i)];
      const auto& b = grids[static_cast<std::size_t>(j)];
      c(i, j) = std::exp(-std::hypot(a.lat - b.lat, a.lon - b.lon) / range);
    }
  }
  return c;
}

/// n draws of N(0, c), one per row.
inline Eigen::MatrixXd correlated_noise(Eigen::Index n, const Eigen::MatrixXd& c, std::uint64_t seed) {
  const Eigen::MatrixXd l = c.llt().matrixL();
  return gaussian(n, c.rows(), seed) * l.transpose();
}

/// `rank` smooth temporal patterns (slow sinusoids and a ramp), unit RMS.
inline Eigen::MatrixXd smooth_trends(Eigen::Index n, int rank) {
  Eigen::MatrixXd f(n, rank);
  for (int k = 0; k < rank; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(n);
      f(i, k) = k == 0 ? 2.0 * t - 1.0
                       : std::sin(2.0 * std::numbers::pi * (k + 0.5) * t + 0.7 * k);
    }
    f.col(k) /= std::sqrt(f.col(k).squaredNorm() / static_cast<double>(n));
  }
  return f;
}

struct Planted {
  StsMatrix data;
  Eigen::MatrixXd noise_correlation;
};

/// Common temporal signal of the given rank with Gaussian per-column loadings, scaled
/// so that each column's signal RMS is `snr` times its unit noise sd, plus
/// spatially correlated noise with correlation exp(-d / range).
inline Planted planted_signal(Eigen::Index n, std::size_t p, int rank, double snr, double range,
                              std::uint64_t seed) {
  const auto grids = lattice_grids(p, 10);
  const Eigen::MatrixXd c = exp_correlation(grids, range);
  const Eigen::MatrixXd f = smooth_trends(n, rank);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> u;
  Eigen::MatrixXd loadings(rank, static_cast<Eigen::Index>(p));
  for (Eigen::Index j = 0; j < loadings.cols(); ++j) {
    for (int k = 0; k < rank; ++k) loadings(k, j) = u(rng);
    loadings.col(j) *= snr / loadings.col(j).norm();
  }
  const Eigen::MatrixXd x = f * loadings + correlated_noise(n, c, seed + 1);
  return Planted{StsMatrix::complete(x, daily_index(static_cast<std::size_t>(n), 1951),
                                     Resolution::daily, grids),
                 c};
}

/// Daily series over `years` calendar years from 1951 whose spatial noise
/// correlation switches from exp(-d / range_before) to exp(-d / range_after)
/// at year index `switch_year`.
inline StsMatrix two_regime(std::size_t p, int years, int switch_year, double range_before,
                            double range_after, std::uint64_t seed) {
  const auto grids = lattice_grids(p, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p)))));
  std::vector<TimeKey> days;
  std::vector<int> year_of;
  for (const auto& key : daily_index(static_cast<std::size_t>(years) * 366 + 1, 1951)) {
    if (key.year >= 1951 + years) break;
    days.push_back(key);
    year_of.push_back(key.year - 1951);
  }
  const auto n = static_cast<Eigen::Index>(days.size());
  const Eigen::MatrixXd before = correlated_noise(n, exp_correlation(grids, range_before), seed);
  const Eigen::MatrixXd after = correlated_noise(n, exp_correlation(grids, range_after), seed + 1);
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = year_of[static_cast<std::size_t>(i)] < switch_year ? before.row(i) : after.row(i);
  }
  return StsMatrix::complete(x, days, Resolution::daily, grids);
}

/// Writes grids.csv and a long-form series.csv whose tmax - tmin equals `dtr`
/// (tmin is a fixed 20 degrees) into `dir`.
inline void write_dataset(const std::filesystem::path& dir, const StsMatrix& dtr) {
  std::filesystem::create_directories(dir);
  std::ofstream grids(dir / "grids.csv");
  grids << "grid_id,lat,lon,zone\n";
  for (const auto& g : dtr.columns) {
    grids << g.grid_id << ',' << csv::format(g.lat) << ',' << csv::format(g.lon) << ',' << g.zone << '\n';
  }
  std::ofstream series(dir / "series.csv");
  series << "date,grid_id,tmax,tmin\n";
  for (Eigen::Index i = 0; i < dtr.values.rows(); ++i) {
    const std::string date = format_time_key(dtr.time_index[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < dtr.values.cols(); ++j) {
      series << date << ',' << dtr.columns[static_cast<std::size_t>(j)].grid_id << ','
             << csv::format(20.0 + dtr.values(i, j)) << ",20\n";
    }
  }
}

}  // namespace csa::testing
