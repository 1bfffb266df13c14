#include "csa/dependence.hpp"
#include "csa/error.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace csa;

namespace {

GridMeta at(const std::string& id, double lat, double lon) { return GridMeta{id, lat, lon, 1, true}; }

AssociationMatrix assoc_of(const Eigen::MatrixXd& m) {
  AssociationMatrix a;
  a.m = m;
  a.method = AssociationMethod::pearson;
  return a;
}

WeightMatrix path_weights(std::size_t p) {
  std::vector<GridMeta> grids;
  for (std::size_t i = 0; i < p; ++i) grids.push_back(at("n" + std::to_string(i), 0.0, static_cast<double>(i)));
  return weights_lag1(grids);
}

}  // namespace

TEST_SUITE("dependence") {

TEST_CASE("bergsma matches the quadruple-loop oracle") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> length(4, 50);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t t = length(rng);
    auto x = testing::gaussian_vector(t, rng);
    auto y = testing::gaussian_vector(t, rng);
    // Mix in dependence and ties on some trials.
    if (trial % 3 == 0) {
      for (std::size_t i = 0; i < t; ++i) y[i] = x[i] * x[i] + 0.3 * y[i];
    }
    if (trial % 5 == 0) {
      for (auto& v : x) v = std::round(v);
    }
    CHECK(bergsma_rho(x, y) == doctest::Approx(oracle::bergsma_rho(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("bergsma self-correlation is exactly one and symmetric") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = testing::gaussian_vector(37, rng);
    const auto y = testing::gaussian_vector(37, rng);
    CHECK(bergsma_rho(x, x) == 1.0);
    CHECK(std::abs(bergsma_rho(x, y) - bergsma_rho(y, x)) <= 1e-12);
  }
}

TEST_CASE("bergsma is invariant to positive affine maps") {
  std::mt19937_64 rng(6);
  const auto x = testing::gaussian_vector(60, rng);
  auto y = testing::gaussian_vector(60, rng);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += std::abs(x[i]);
  std::vector<double> z(x.size());
  std::transform(x.begin(), x.end(), z.begin(), [](double v) { return 3.7 * v - 12.0; });
  CHECK(std::abs(bergsma_rho(z, y) - bergsma_rho(x, y)) <= 1e-10);
  CHECK(std::abs(bergsma_rho(y, z) - bergsma_rho(y, x)) <= 1e-10);
}

TEST_CASE("bergsma detects nonlinear dependence that Pearson misses") {
  std::mt19937_64 rng(8);
  const auto x = testing::gaussian_vector(500, rng);
  std::vector<double> y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return v * v; });
  CHECK(bergsma_rho(x, y) > 0.2);
}

TEST_CASE("bergsma is near zero under independence") {
  double total = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const auto x = testing::gaussian_vector(2000, rng);
    const auto y = testing::gaussian_vector(2000, rng);
    total += bergsma_rho(x, y);
  }
  CHECK(std::abs(total / 20.0) < 0.02);
}

TEST_CASE("bergsma input errors") {
  const std::vector<double> three{1, 2, 3};
  const std::vector<double> flat{2, 2, 2, 2};
  const std::vector<double> four{1, 2, 3, 5};
  auto kind = [](auto f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::config;
  };
  CHECK(kind([&] { bergsma_rho(three, three); }) == ErrorKind::insufficient_data);
  CHECK(kind([&] { bergsma_rho(flat, four); }) == ErrorKind::zero_variance);
  CHECK(kind([&] { bergsma_rho(four, three); }) == ErrorKind::structural);
}

TEST_CASE("bergsma matrix fast path equals the naive path") {
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index p = 2 + trial * 2;
    const Eigen::Index t = 20 + trial * 20;
    Eigen::MatrixXd v = testing::gaussian(t, p, 40 + static_cast<std::uint64_t>(trial));
    v.col(1) = v.col(0).array().square() + 0.1 * v.col(1).array();
    const StsMatrix x = testing::daily_matrix(v);
    const auto fast = bergsma_matrix(x, 3);
    const auto naive = bergsma_matrix_naive(x);
    CHECK((fast.m - naive.m).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(fast.m == fast.m.transpose());
    CHECK(fast.m.diagonal().isOnes());
    CHECK(fast.method == AssociationMethod::bergsma);
    CHECK(bergsma_matrix(x, 1).m == fast.m);
  }
}

TEST_CASE("bergsma matrix on identical and independent columns") {
  Eigen::MatrixXd same(30, 3);
  same.col(0) = testing::gaussian(30, 1, 3);
  same.col(1) = same.col(0);
  same.col(2) = same.col(0);
  CHECK(bergsma_matrix(testing::daily_matrix(same)).m.isOnes(1e-12));

  const auto indep = bergsma_matrix(testing::daily_matrix(testing::gaussian(2000, 2, 12)));
  CHECK(std::abs(indep.m(0, 1)) < 0.05);

  Eigen::MatrixXd flat = testing::gaussian(10, 3, 1);
  flat.col(2).setConstant(4.0);
  try {
    bergsma_matrix_naive(testing::daily_matrix(flat));
    FAIL("expected zero-variance error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::zero_variance);
    CHECK(std::string(e.what()).find("g002") != std::string::npos);
  }
  CHECK_THROWS_AS(bergsma_matrix(testing::daily_matrix(flat)), Error);
}

TEST_CASE("lag-1 adjacency weights") {
  const auto pair = weights_lag1({at("a", 0, 0), at("b", 0, 1)});
  CHECK(pair.w(0, 1) == 1.0);
  CHECK(pair.w(1, 0) == 1.0);
  CHECK(pair.w.diagonal().isZero());

  std::vector<GridMeta> grid;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) grid.push_back(at("c" + std::to_string(r * 3 + c), r, c));
  }
  const auto rook = weights_lag1(grid, AdjacencyRule::rook);
  CHECK((rook.w.row(4).array() > 0).count() == 4);
  CHECK(rook.w(4, 1) == doctest::Approx(0.25));
  CHECK((rook.w.row(0).array() > 0).count() == 2);
  const auto queen = weights_lag1(grid, AdjacencyRule::queen);
  CHECK((queen.w.row(4).array() > 0).count() == 8);
  for (Eigen::Index i = 0; i < 9; ++i) {
    CHECK(rook.w.row(i).sum() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(queen.w.row(i).sum() == doctest::Approx(1.0).epsilon(1e-10));
  }

  const auto lonely = weights_lag1({at("a", 0, 0), at("b", 0, 1), at("c", 3, 3)});
  CHECK(lonely.isolated == 1);
  CHECK(lonely.w.row(2).isZero());
  CHECK_THROWS_AS(weights_lag1({at("a", 0, 0), at("b", 0, 0), at("c", 0, 1)}), Error);
}

TEST_CASE("exponential decay weights") {
  const auto two = weights_expdecay({at("a", 0, 0), at("b", 0, 2.5)}, 2.5);
  CHECK(two.w(0, 1) == doctest::Approx(1.0));

  // Collinear at spacing 1, theta 1: the middle row is split evenly, the end
  // rows weight e^-1 against e^-2.
  const auto line = weights_expdecay({at("a", 0, 0), at("b", 0, 1), at("c", 0, 2)}, 1.0);
  const double e1 = std::exp(-1.0), e2 = std::exp(-2.0);
  CHECK(line.w(0, 1) == doctest::Approx(e1 / (e1 + e2)).epsilon(1e-14));
  CHECK(line.w(0, 2) == doctest::Approx(e2 / (e1 + e2)).epsilon(1e-14));
  CHECK(line.w(1, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(line.w(1, 2) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(line.w(2, 0) == doctest::Approx(line.w(0, 2)));
  CHECK(line.w.diagonal().isZero());

  const auto wide = weights_expdecay({at("a", 0, 0), at("b", 0, 1), at("c", 0, 5), at("d", 4, 4)}, 1e9);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      if (i != j) CHECK(wide.w(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
    }
  }

  try {
    weights_expdecay({at("a", 1, 1), at("b", 1, 1)});
    FAIL("expected coincident-location error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::coincident_location);
  }
  CHECK_THROWS_AS(weights_expdecay({at("a", 0, 0), at("b", 0, 1)}, 0.0), Error);
}

TEST_CASE("spatial bergsma hand cases") {
  const auto w3 = path_weights(3);
  Eigen::Matrix3d m;
  m << 1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0;
  CHECK(std::abs(spatial_bergsma(assoc_of(m), w3) - 0.5) <= 1e-12);
  CHECK(spatial_bergsma(assoc_of(Eigen::Matrix3d::Identity()), w3) == 0.0);

  Eigen::Matrix2d two;
  two << 1.0, 0.37, 0.37, 1.0;
  CHECK(spatial_bergsma(assoc_of(two), path_weights(2)) == doctest::Approx(0.37).epsilon(1e-14));

  CHECK_THROWS_AS(spatial_bergsma(assoc_of(two), w3), Error);
}

TEST_CASE("spatial bergsma is linear in the association matrix") {
  const auto w = weights_expdecay(testing::lattice_grids(12, 4), 1.5);
  const Eigen::MatrixXd a0 = testing::gaussian(12, 12, 1);
  const Eigen::MatrixXd b0 = testing::gaussian(12, 12, 2);
  const Eigen::MatrixXd a = (a0 + a0.transpose()) / 2.0;
  const Eigen::MatrixXd b = (b0 + b0.transpose()) / 2.0;
  const double alpha = 0.7, beta = -1.9;
  const double lhs = spatial_bergsma(assoc_of(alpha * a + beta * b), w);
  const double rhs = alpha * spatial_bergsma(assoc_of(a), w) + beta * spatial_bergsma(assoc_of(b), w);
  CHECK(std::abs(lhs - rhs) <= 1e-12);
}

TEST_CASE("moran's I hand cases and permutation mean") {
  const auto path = path_weights(4);
  const std::vector<double> alternating{1, -1, 1, -1};
  CHECK(std::abs(morans_i(alternating, path) - (-1.0)) <= 1e-12);

  // Two disconnected pairs with matching values.
  const auto cliques = weights_lag1({at("a", 0, 0), at("b", 0, 1), at("c", 5, 5), at("d", 5, 6)});
  CHECK(morans_i(std::vector<double>{3, 3, -2, -2}, cliques) > 0.0);

  const std::size_t p = 64;
  const auto w = weights_lag1(testing::lattice_grids(p, 8));
  std::mt19937_64 rng(17);
  auto values = testing::gaussian_vector(p, rng);
  std::vector<double> draws;
  for (int k = 0; k < 200; ++k) {
    std::shuffle(values.begin(), values.end(), rng);
    draws.push_back(morans_i(values, w));
  }
  double mean = 0.0;
  for (const double d : draws) mean += d;
  mean /= static_cast<double>(draws.size());
  double var = 0.0;
  for (const double d : draws) var += (d - mean) * (d - mean);
  const double se = std::sqrt(var / static_cast<double>(draws.size() - 1) / static_cast<double>(draws.size()));
  CHECK(std::abs(mean + 1.0 / static_cast<double>(p - 1)) < 4.0 * se);

  CHECK_THROWS_AS(morans_i(std::vector<double>{1, 1, 1, 1}, path), Error);
  WeightMatrix empty = path;
  empty.w.setZero();
  CHECK_THROWS_AS(morans_i(alternating, empty), Error);
}

TEST_CASE("S_B series CSV round trip") {
  SbSeries series;
  series.entries.push_back({"1951", "all", WeightScheme::lag1_adjacency, AssociationMethod::bergsma, 0.25});
  series.entries.push_back({"1952", "zone3", WeightScheme::exp_decay, AssociationMethod::pearson, -0.125});
  std::ostringstream text;
  write_sb_csv(text, series);
  CHECK(text.str().rfind("window,region,scheme,method,value\n", 0) == 0);

  const auto path = std::filesystem::temp_directory_path() / "csa_sb_roundtrip.csv";
  std::ofstream(path) << text.str();
  const auto back = read_sb_csv(path.string());
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[1].window == "1952");
  CHECK(back.entries[1].region == "zone3");
  CHECK(back.entries[1].scheme == WeightScheme::exp_decay);
  CHECK(back.entries[1].method == AssociationMethod::pearson);
  CHECK(back.entries[1].value == -0.125);
}

}  // TEST_SUITE
