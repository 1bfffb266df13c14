#pragma once

#include "csa/ingest.hpp"
#include "csa/random.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace csa::testing {

inline std::vector<TimeKey> daily_index(std::size_t n, int year = 2001, int month = 1, int day = 1) {
  using namespace std::chrono;
  sys_days start{year_month_day{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                                std::chrono::day{static_cast<unsigned>(day)}}};
  std::vector<TimeKey> index;
  for (std::size_t i = 0; i < n; ++i) {
    const year_month_day ymd{start + days{static_cast<int>(i)}};
    index.push_back(make_day(static_cast<int>(ymd.year()), static_cast<int>(unsigned(ymd.month())),
                             static_cast<int>(unsigned(ymd.day()))));
  }
  return index;
}

inline std::vector<TimeKey> monthly_index(std::size_t n, int year = 2001) {
  std::vector<TimeKey> index;
  for (std::size_t i = 0; i < n; ++i) {
    index.push_back(make_month(year + static_cast<int>(i / 12), static_cast<int>(i % 12) + 1));
  }
  return index;
}

/// p grids laid out row-major on a lattice `width` cells wide, 1 degree apart.
inline std::vector<GridMeta> lattice_grids(std::size_t p, std::size_t width, int zone = 1) {
  std::vector<GridMeta> grids;
  for (std::size_t j = 0; j < p; ++j) {
    char id[32];
    std::snprintf(id, sizeof(id), "g%03zu", j);
    grids.push_back(GridMeta{id, 10.0 + static_cast<double>(j / width),
                             70.0 + static_cast<double>(j % width), zone, true});
  }
  return grids;
}

inline StsMatrix daily_matrix(const Eigen::MatrixXd& values, int year = 2001) {
  const auto n = static_cast<std::size_t>(values.rows());
  const auto p = static_cast<std::size_t>(values.cols());
  return StsMatrix::complete(values, daily_index(n, year), Resolution::daily,
                             lattice_grids(p, std::max<std::size_t>(1, p)));
}

inline Eigen::MatrixXd gaussian(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = normal(rng);
  }
  return x;
}

inline std::vector<double> gaussian_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

}  // namespace csa::testing
