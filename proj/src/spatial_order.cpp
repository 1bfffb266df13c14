#include "csa/spatial_order.hpp"

#include "csa/csv.hpp"
#include "csa/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <tuple>

namespace csa {

namespace {

double infer_step(std::vector<double> coords) {
  std::sort(coords.begin(), coords.end());
  double step = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < coords.size(); ++i) {
    const double gap = coords[i] - coords[i - 1];
    if (gap > 1e-9) step = std::min(step, gap);
  }
  return std::isfinite(step) ? step : 1.0;
}

long snap(double value, double origin, double step, const GridMeta& g) {
  const double position = (value - origin) / step;
  const double rounded = std::round(position);
  if (std::abs(position - rounded) > 1e-6) {
    fail(ErrorKind::structural, "grid '" + g.grid_id + "' does not lie on the lattice");
  }
  return static_cast<long>(rounded);
}

}  // namespace

const char* to_string(OrderMethod method) {
  switch (method) {
    case OrderMethod::identity: return "identity";
    case OrderMethod::spiral: return "spiral";
    case OrderMethod::hilbert: return "hilbert";
  }
  return "identity";
}

OrderMethod parse_order_method(const std::string& text) {
  if (text == "identity") return OrderMethod::identity;
  if (text == "spiral") return OrderMethod::spiral;
  if (text == "hilbert") return OrderMethod::hilbert;
  fail(ErrorKind::config, "unknown ordering method '" + text + "'");
}

LatticeSpec infer_lattice(const std::vector<GridMeta>& grids, const LatticeSpec& spec) {
  std::vector<double> lats, lons;
  for (const auto& g : grids) {
    lats.push_back(g.lat);
    lons.push_back(g.lon);
  }
  return LatticeSpec{spec.lat_step > 0.0 ? spec.lat_step : infer_step(lats),
                     spec.lon_step > 0.0 ? spec.lon_step : infer_step(lons)};
}

std::vector<LatticeCell> quantize_lattice(const std::vector<GridMeta>& grids,
                                          const LatticeSpec& spec) {
  if (grids.empty()) return {};
  std::vector<double> lats, lons;
  for (const auto& g : grids) {
    if (!std::isfinite(g.lat) || !std::isfinite(g.lon)) {
      fail(ErrorKind::non_finite, "grid '" + g.grid_id + "' has non-finite coordinates");
    }
    lats.push_back(g.lat);
    lons.push_back(g.lon);
  }
  const double lat_step = spec.lat_step > 0.0 ? spec.lat_step : infer_step(lats);
  const double lon_step = spec.lon_step > 0.0 ? spec.lon_step : infer_step(lons);
  const double lat0 = *std::min_element(lats.begin(), lats.end());
  const double lon0 = *std::min_element(lons.begin(), lons.end());

  std::vector<LatticeCell> cells;
  std::map<LatticeCell, std::size_t> owner;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const LatticeCell cell{snap(grids[i].lat, lat0, lat_step, grids[i]),
                           snap(grids[i].lon, lon0, lon_step, grids[i])};
    const auto [it, inserted] = owner.emplace(cell, i);
    if (!inserted) {
      fail(ErrorKind::duplicate, "grids '" + grids[it->second].grid_id + "' and '" +
                                     grids[i].grid_id + "' occupy the same lattice cell");
    }
    cells.push_back(cell);
  }
  return cells;
}

SpatialOrder spiral_order(const std::vector<GridMeta>& grids, bool stratify_by_zone,
                          const LatticeSpec& spec) {
  const auto cells = quantize_lattice(grids, spec);
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    strata[stratify_by_zone ? grids[i].zone : 0].push_back(i);
  }

  SpatialOrder order;
  order.method = OrderMethod::spiral;
  order.stratify_by_zone = stratify_by_zone;
  for (auto& [zone, members] : strata) {
    long row0 = std::numeric_limits<long>::max();
    long col0 = std::numeric_limits<long>::max();
    for (const auto i : members) {
      row0 = std::min(row0, cells[i].row);
      col0 = std::min(col0, cells[i].col);
    }
    // Diagonal d = row + col; odd diagonals run with increasing row, even
    // ones with decreasing row, so (1,1) (1,2) (2,1) (3,1) (2,2) (1,3) ...
    auto key = [&](std::size_t i) {
      const long row = cells[i].row - row0;
      const long col = cells[i].col - col0;
      const long diagonal = row + col;
      const long along = diagonal % 2 == 1 ? row : -row;
      return std::pair{diagonal, along};
    };
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    order.permutation.insert(order.permutation.end(), members.begin(), members.end());
  }
  return order;
}

std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y, int order_bits) {
  if (order_bits < 1 || order_bits > 31) {
    fail(ErrorKind::argument, "order_bits must lie in [1, 31]");
  }
  const std::uint64_t side = std::uint64_t{1} << order_bits;
  std::uint64_t rx_pos = x;
  std::uint64_t ry_pos = y;
  std::uint64_t d = 0;
  for (std::uint64_t s = side / 2; s > 0; s /= 2) {
    const std::uint64_t rx = (rx_pos & s) ? 1 : 0;
    const std::uint64_t ry = (ry_pos & s) ? 1 : 0;
    d += s * s * ((3 * rx) ^ ry);
    // Rotate the quadrant so the sub-curve starts at its local origin.
    if (ry == 0) {
      if (rx == 1) {
        rx_pos = side - 1 - rx_pos;
        ry_pos = side - 1 - ry_pos;
      }
      std::swap(rx_pos, ry_pos);
    }
  }
  return d;
}

SpatialOrder hilbert_order(const std::vector<GridMeta>& grids, int order_bits,
                           bool stratify_by_zone) {
  if (order_bits < 1 || order_bits > 31) {
    fail(ErrorKind::argument, "order_bits must lie in [1, 31]");
  }
  SpatialOrder order;
  order.method = OrderMethod::hilbert;
  order.stratify_by_zone = stratify_by_zone;
  if (grids.empty()) return order;

  double lat_min = std::numeric_limits<double>::infinity(), lat_max = -lat_min;
  double lon_min = lat_min, lon_max = -lat_min;
  for (const auto& g : grids) {
    if (!std::isfinite(g.lat) || !std::isfinite(g.lon)) {
      fail(ErrorKind::non_finite, "grid '" + g.grid_id + "' has non-finite coordinates");
    }
    lat_min = std::min(lat_min, g.lat);
    lat_max = std::max(lat_max, g.lat);
    lon_min = std::min(lon_min, g.lon);
    lon_max = std::max(lon_max, g.lon);
  }
  if (grids.size() > 1 && lat_max == lat_min && lon_max == lon_min) {
    fail(ErrorKind::degenerate_extent, "all locations coincide; Hilbert rescaling undefined");
  }

  const double side = std::ldexp(1.0, order_bits);
  auto cell = [side](double value, double lo, double hi) -> std::uint32_t {
    if (hi == lo) return 0;
    const double scaled = std::floor((value - lo) / (hi - lo) * side);
    return static_cast<std::uint32_t>(std::clamp(scaled, 0.0, side - 1.0));
  };

  std::vector<std::uint64_t> index(grids.size());
  for (std::size_t i = 0; i < grids.size(); ++i) {
    index[i] = hilbert_index(cell(grids[i].lon, lon_min, lon_max),
                             cell(grids[i].lat, lat_min, lat_max), order_bits);
  }
  order.permutation.resize(grids.size());
  std::iota(order.permutation.begin(), order.permutation.end(), std::size_t{0});
  std::sort(order.permutation.begin(), order.permutation.end(),
            [&](std::size_t a, std::size_t b) {
              const int za = stratify_by_zone ? grids[a].zone : 0;
              const int zb = stratify_by_zone ? grids[b].zone : 0;
              return std::tie(za, index[a], grids[a].grid_id) <
                     std::tie(zb, index[b], grids[b].grid_id);
            });
  return order;
}

SpatialOrder identity_order(std::size_t p) {
  SpatialOrder order;
  order.permutation.resize(p);
  std::iota(order.permutation.begin(), order.permutation.end(), std::size_t{0});
  return order;
}

bool is_permutation(const std::vector<std::size_t>& permutation) {
  std::vector<bool> seen(permutation.size(), false);
  for (const auto i : permutation) {
    if (i >= permutation.size() || seen[i]) return false;
    seen[i] = true;
  }
  return true;
}

StsMatrix apply_order(const StsMatrix& x, const SpatialOrder& order) {
  if (order.permutation.size() != x.cols()) {
    fail(ErrorKind::structural, "ordering has " + std::to_string(order.permutation.size()) +
                                    " entries for " + std::to_string(x.cols()) + " columns");
  }
  if (!is_permutation(order.permutation)) {
    fail(ErrorKind::structural, "ordering is not a permutation");
  }
  std::vector<Eigen::Index> cols(order.permutation.begin(), order.permutation.end());
  StsMatrix out;
  out.values = x.values(Eigen::all, cols);
  out.mask = x.mask(Eigen::all, cols);
  for (const auto j : order.permutation) out.columns.push_back(x.columns[j]);
  out.time_index = x.time_index;
  out.resolution = x.resolution;
  out.label = MatrixLabel::reordered;
  return out;
}

void write_order_csv(std::ostream& out, const SpatialOrder& order,
                     const std::vector<GridMeta>& grids) {
  out << "rank,grid_id,lat,lon,zone\n";
  for (std::size_t r = 0; r < order.permutation.size(); ++r) {
    const GridMeta& g = grids[order.permutation[r]];
    out << csv::join({std::to_string(r + 1), g.grid_id, csv::format(g.lat), csv::format(g.lon),
                      std::to_string(g.zone)})
        << '\n';
  }
}

}  // namespace csa
