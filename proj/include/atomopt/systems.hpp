#pragma once

#include <optional>
#include <vector>

#include "atomopt/rng.hpp"
#include "atomopt/types.hpp"

namespace atomopt::systems {

/// b - a, reduced to the minimum image when a cubic cell is given. Each
/// component of the periodic result lies in (-edge/2, edge/2].
Vec3 displacement(const Vec3& a, const Vec3& b,
                  const std::optional<CubicCell>& cell);

double distance(const Vec3& a, const Vec3& b,
                const std::optional<CubicCell>& cell);

struct NeighborPair {
  int i;
  int j;
  double dist;
};

/// All pairs i<j with minimum-image distance strictly below cutoff.
std::vector<NeighborPair> neighbor_pairs(const Configuration& config,
                                         double cutoff);

/// Periodic diamond-cubic lattice: 8 atoms per conventional cell,
/// `cells_per_edge` cells along each axis, overall edge = cells * cell_edge.
Configuration diamond_lattice(int cells_per_edge, double cell_edge);

/// i.i.d. uniform coordinates in [0, box_edge]^3; free-space (no cell).
/// `species` must have exactly n entries.
Configuration random_box_init(Eigen::Index n, std::vector<int> species,
                              double box_edge, RngStream rng);

}  // namespace atomopt::systems
