#include "atomopt/systems.hpp"

#include <cmath>
#include <stdexcept>

namespace atomopt::systems {

Vec3 displacement(const Vec3& a, const Vec3& b,
                  const std::optional<CubicCell>& cell) {
  Vec3 d = b - a;
  if (cell) {
    const double edge = cell->edge;
    for (int k = 0; k < 3; ++k) {
      // Keeps each component in (-edge/2, edge/2].
      d[k] -= edge * std::ceil(d[k] / edge - 0.5);
    }
  }
  return d;
}

double distance(const Vec3& a, const Vec3& b,
                const std::optional<CubicCell>& cell) {
  return displacement(a, b, cell).norm();
}

std::vector<NeighborPair> neighbor_pairs(const Configuration& config,
                                         double cutoff) {
  if (cutoff <= 0.0) throw std::invalid_argument("neighbor_pairs: cutoff must be > 0");
  std::vector<NeighborPair> pairs;
  const auto n = config.n_atoms();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d =
          distance(config.positions.row(i), config.positions.row(j), config.cell);
      if (d < cutoff) {
        pairs.push_back({static_cast<int>(i), static_cast<int>(j), d});
      }
    }
  }
  return pairs;
}

Configuration diamond_lattice(int cells_per_edge, double cell_edge) {
  if (cells_per_edge < 1) {
    throw std::invalid_argument("diamond_lattice: cells_per_edge must be >= 1");
  }
  if (cell_edge <= 0.0) {
    throw std::invalid_argument("diamond_lattice: cell_edge must be > 0");
  }
  // FCC sites plus the (1/4,1/4,1/4) basis.
  static constexpr double kBasis[8][3] = {
      {0.00, 0.00, 0.00}, {0.00, 0.50, 0.50}, {0.50, 0.00, 0.50},
      {0.50, 0.50, 0.00}, {0.25, 0.25, 0.25}, {0.25, 0.75, 0.75},
      {0.75, 0.25, 0.75}, {0.75, 0.75, 0.25}};

  const int c = cells_per_edge;
  const Eigen::Index n = 8ll * c * c * c;
  Configuration config;
  config.positions.resize(n, 3);
  config.species.assign(static_cast<std::size_t>(n), 0);
  Eigen::Index row = 0;
  for (int ix = 0; ix < c; ++ix) {
    for (int iy = 0; iy < c; ++iy) {
      for (int iz = 0; iz < c; ++iz) {
        for (const auto& b : kBasis) {
          config.positions(row, 0) = (ix + b[0]) * cell_edge;
          config.positions(row, 1) = (iy + b[1]) * cell_edge;
          config.positions(row, 2) = (iz + b[2]) * cell_edge;
          ++row;
        }
      }
    }
  }
  config.cell = CubicCell{c * cell_edge};
  return config;
}

Configuration random_box_init(Eigen::Index n, std::vector<int> species,
                              double box_edge, RngStream rng) {
  if (n < 1) throw std::invalid_argument("random_box_init: n must be >= 1");
  if (box_edge <= 0.0) {
    throw std::invalid_argument("random_box_init: box_edge must be > 0");
  }
  if (static_cast<Eigen::Index>(species.size()) != n) {
    throw std::invalid_argument("random_box_init: species size mismatch");
  }
  Configuration config;
  config.positions.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) config.positions(i, k) = box_edge * rng.uniform();
  }
  config.species = std::move(species);
  return config;
}

}  // namespace atomopt::systems
