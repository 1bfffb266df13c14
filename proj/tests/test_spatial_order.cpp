#include "csa/error.hpp"
#include "csa/spatial_order.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

using namespace csa;

namespace {

GridMeta grid_at(const std::string& id, double lat, double lon, int zone = 1) {
  return GridMeta{id, lat, lon, zone, true};
}

// Grids for a rows x cols lattice, shuffled so the order is not the input order.
std::vector<GridMeta> full_lattice(int rows, int cols, std::uint64_t seed = 7) {
  std::vector<GridMeta> grids;
  for (int r = 1; r <= rows; ++r) {
    for (int c = 1; c <= cols; ++c) {
      grids.push_back(grid_at("r" + std::to_string(r) + "c" + std::to_string(c), 20.0 + r, 75.0 + c));
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(grids.begin(), grids.end(), rng);
  return grids;
}

std::vector<std::pair<int, int>> visits(const SpatialOrder& order, const std::vector<GridMeta>& grids) {
  std::vector<std::pair<int, int>> out;
  for (const auto i : order.permutation) {
    out.emplace_back(static_cast<int>(grids[i].lat - 20.0), static_cast<int>(grids[i].lon - 75.0));
  }
  return out;
}

double mean_step(const std::vector<GridMeta>& g, const std::vector<std::size_t>& perm) {
  double total = 0.0;
  for (std::size_t r = 1; r < perm.size(); ++r) {
    total += std::hypot(g[perm[r]].lat - g[perm[r - 1]].lat, g[perm[r]].lon - g[perm[r - 1]].lon);
  }
  return total / static_cast<double>(perm.size() - 1);
}

}  // namespace

TEST_SUITE("spatial_order") {

TEST_CASE("spiral walk on a 3x3 lattice follows anti-diagonals") {
  const auto grids = full_lattice(3, 3);
  const auto order = spiral_order(grids, false);
  const std::vector<std::pair<int, int>> expected{{1, 1}, {1, 2}, {2, 1}, {3, 1}, {2, 2},
                                                  {1, 3}, {2, 3}, {3, 2}, {3, 3}};
  CHECK(visits(order, grids) == expected);
  CHECK(order.method == OrderMethod::spiral);
  CHECK(is_permutation(order.permutation));
}

TEST_CASE("spiral walk on small lattices") {
  const auto two = full_lattice(2, 2);
  const std::vector<std::pair<int, int>> expected{{1, 1}, {1, 2}, {2, 1}, {2, 2}};
  CHECK(visits(spiral_order(two, false), two) == expected);

  const auto strip = full_lattice(1, 6);
  const auto strip_visits = visits(spiral_order(strip, false), strip);
  for (std::size_t r = 0; r < strip_visits.size(); ++r) {
    CHECK(strip_visits[r] == std::pair<int, int>{1, static_cast<int>(r) + 1});
  }
}

TEST_CASE("spiral walk covers every rectangular lattice cell once") {
  for (int rows = 1; rows <= 6; ++rows) {
    for (int cols = 1; cols <= 6; ++cols) {
      const auto grids = full_lattice(rows, cols, static_cast<std::uint64_t>(rows * 10 + cols));
      const auto order = spiral_order(grids, false);
      CHECK(order.permutation.size() == grids.size());
      CHECK(is_permutation(order.permutation));
    }
  }
}

TEST_CASE("spiral walk stratifies by zone and skips absent cells") {
  std::vector<GridMeta> grids{grid_at("a", 1, 1, 2), grid_at("b", 1, 2, 1), grid_at("c", 2, 1, 2),
                              grid_at("d", 2, 2, 1), grid_at("e", 3, 3, 1)};
  const auto order = spiral_order(grids, true);
  std::vector<std::string> ids;
  for (const auto i : order.permutation) ids.push_back(grids[i].grid_id);
  // Zone 1 anchored at (1, 2): b, d, then e; zone 2: a, c.
  CHECK(ids == std::vector<std::string>{"b", "d", "e", "a", "c"});
  CHECK(order.stratify_by_zone);
}

TEST_CASE("two grids in one lattice cell are rejected by name") {
  std::vector<GridMeta> grids{grid_at("first", 1, 1), grid_at("second", 1, 1), grid_at("x", 2, 1)};
  try {
    spiral_order(grids);
    FAIL("expected duplicate-cell error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::duplicate);
    CHECK(std::string(e.what()).find("first") != std::string::npos);
    CHECK(std::string(e.what()).find("second") != std::string::npos);
  }
  CHECK_THROWS_AS(spiral_order({grid_at("a", 1, 1), grid_at("b", 1.3, 2), grid_at("c", 2, 3)}), Error);
}

TEST_CASE("hilbert index agrees with the geometric construction") {
  for (int bits = 1; bits <= 5; ++bits) {
    const auto path = oracle::hilbert_path(bits);
    for (std::size_t d = 0; d < path.size(); ++d) {
      CHECK(hilbert_index(path[d].first, path[d].second, bits) == d);
    }
  }
  CHECK_THROWS_AS(hilbert_index(0, 0, 0), Error);
  CHECK_THROWS_AS(hilbert_index(0, 0, 32), Error);
}

TEST_CASE("hilbert order with one bit visits the four cells in curve order") {
  // x is longitude, y latitude.
  std::vector<GridMeta> grids{grid_at("ne", 1, 1), grid_at("sw", 0, 0), grid_at("se", 0, 1),
                              grid_at("nw", 1, 0)};
  const auto order = hilbert_order(grids, 1, false);
  std::vector<std::string> ids;
  for (const auto i : order.permutation) ids.push_back(grids[i].grid_id);
  CHECK(ids == std::vector<std::string>{"sw", "nw", "ne", "se"});
}

TEST_CASE("hilbert order edge cases") {
  CHECK(hilbert_order({grid_at("only", 5, 5)}, 8).permutation == std::vector<std::size_t>{0});
  CHECK_THROWS_AS(hilbert_order({grid_at("a", 5, 5), grid_at("b", 5, 5)}, 8), Error);
  CHECK_THROWS_AS(hilbert_order({grid_at("a", 5, 5)}, 0), Error);

  std::vector<GridMeta> line;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 40.0);
  for (int i = 0; i < 50; ++i) line.push_back(grid_at("p" + std::to_string(i), 12.0, u(rng)));
  const auto order = hilbert_order(line, 10, false);
  for (std::size_t r = 1; r < order.permutation.size(); ++r) {
    CHECK(line[order.permutation[r - 1]].lon <= line[order.permutation[r]].lon);
  }
}

TEST_CASE("hilbert order matches sorting by the brute-force curve position") {
  const int bits = 4;
  const auto path = oracle::hilbert_path(bits);
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> position;
  for (std::size_t d = 0; d < path.size(); ++d) position[path[d]] = d;

  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> cell(0, 15);
  std::vector<GridMeta> grids;
  // Corners pin the bounding box to [0, 15] so cells map one-to-one.
  grids.push_back(grid_at("c0", 0, 0));
  grids.push_back(grid_at("c1", 15, 15));
  for (int i = 0; i < 40; ++i) grids.push_back(grid_at("q" + std::to_string(i), cell(rng), cell(rng)));
  const auto order = hilbert_order(grids, bits, false);
  for (std::size_t r = 1; r < order.permutation.size(); ++r) {
    const auto& a = grids[order.permutation[r - 1]];
    const auto& b = grids[order.permutation[r]];
    // Rescaling maps coordinate v to floor(v / 15 * 16), clamped.
    auto to_cell = [](double v) { return static_cast<std::uint32_t>(std::min(15.0, std::floor(v / 15.0 * 16.0))); };
    const auto pa = position.at({to_cell(a.lon), to_cell(a.lat)});
    const auto pb = position.at({to_cell(b.lon), to_cell(b.lat)});
    CHECK(pa <= pb);
    if (pa == pb) CHECK(a.grid_id < b.grid_id);
  }
}

TEST_CASE("hilbert order is more local than random permutations") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> lat(5.0, 35.0), lon(65.0, 98.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<GridMeta> points;
    for (int i = 0; i < 128; ++i) points.push_back(grid_at("s" + std::to_string(i), lat(rng), lon(rng)));
    const double curve = mean_step(points, hilbert_order(points, 16, false).permutation);
    double random_total = 0.0;
    for (int k = 0; k < 20; ++k) {
      std::vector<std::size_t> perm(points.size());
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      random_total += mean_step(points, perm);
    }
    CHECK(curve < random_total / 20.0);
  }
}

TEST_CASE("apply_order permutes columns and metadata") {
  StsMatrix x = testing::daily_matrix(testing::gaussian(6, 4, 5));
  const StsMatrix same = apply_order(x, identity_order(4));
  CHECK(same.values == x.values);
  CHECK(same.label == MatrixLabel::reordered);

  SpatialOrder reverse;
  reverse.permutation = {3, 2, 1, 0};
  const StsMatrix once = apply_order(x, reverse);
  CHECK(once.columns[0].grid_id == "g003");
  CHECK(once.values.col(0) == x.values.col(3));
  const StsMatrix twice = apply_order(once, reverse);
  CHECK(twice.values == x.values);
  CHECK(twice.columns[2].grid_id == x.columns[2].grid_id);

  SpatialOrder short_order;
  short_order.permutation = {0, 1};
  CHECK_THROWS_AS(apply_order(x, short_order), Error);
  SpatialOrder repeated;
  repeated.permutation = {0, 0, 1, 2};
  CHECK_THROWS_AS(apply_order(x, repeated), Error);
}

}  // TEST_SUITE
