#pragma once

#include "csa/ingest.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace csa {

enum class OrderMethod { identity, spiral, hilbert };

const char* to_string(OrderMethod method);
OrderMethod parse_order_method(const std::string& text);

/// A linear ordering of locations. `permutation[r]` is the source column at rank r.
struct SpatialOrder {
  std::vector<std::size_t> permutation;
  OrderMethod method = OrderMethod::identity;
  bool stratify_by_zone = false;
};

/// Integer lattice position: row counts latitude steps, col longitude steps.
struct LatticeCell {
  long row = 0;
  long col = 0;

  auto operator<=>(const LatticeCell&) const = default;
};

/// Lattice spacing in degrees. A zero step is inferred as the smallest
/// positive gap between distinct coordinates.
struct LatticeSpec {
  double lat_step = 0.0;
  double lon_step = 0.0;
};

/// Fills zero steps of `spec` from the coordinates of `grids`.
LatticeSpec infer_lattice(const std::vector<GridMeta>& grids, const LatticeSpec& spec = {});

/// Snaps every grid onto the lattice anchored at the minimum (lat, lon).
/// Throws on off-lattice points or two grids sharing a cell.
std::vector<LatticeCell> quantize_lattice(const std::vector<GridMeta>& grids,
                                          const LatticeSpec& spec = {});

/// Anti-diagonal boustrophedon walk starting from the lowest (lat, lon)
/// corner of each stratum. Strata are zones in ascending order when
/// `stratify_by_zone` is set.
SpatialOrder spiral_order(const std::vector<GridMeta>& grids, bool stratify_by_zone = true,
                          const LatticeSpec& spec = {});

/// Distance along the Hilbert curve of side 2^order_bits for cell (x, y).
std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y, int order_bits);

/// Sorts grids by (zone if stratified, Hilbert index of the rescaled
/// (lon, lat) cell, grid_id).
SpatialOrder hilbert_order(const std::vector<GridMeta>& grids, int order_bits = 16,
                           bool stratify_by_zone = true);

SpatialOrder identity_order(std::size_t p);

bool is_permutation(const std::vector<std::size_t>& permutation);

/// Permutes columns, mask and metadata; the result is labelled D.
StsMatrix apply_order(const StsMatrix& x, const SpatialOrder& order);

/// `rank,grid_id,lat,lon,zone`, one row per rank.
void write_order_csv(std::ostream& out, const SpatialOrder& order,
                     const std::vector<GridMeta>& grids);

}  // namespace csa
