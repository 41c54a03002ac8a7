#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace atomopt {

/// N x 3 coordinate block, one row per atom. Row-major so that the flat
/// per-coordinate view used by the optimizers is (atom, axis) ordered.
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Vec3 = Eigen::RowVector3d;

struct CubicCell {
  double edge = 0.0;
};

/// The state being optimized: positions, species labels and an optional
/// periodic cell. Lengths are in angstrom except for reduced-unit potentials.
struct Configuration {
  Positions positions;
  std::vector<int> species;
  std::optional<CubicCell> cell;

  Eigen::Index n_atoms() const { return positions.rows(); }
};

inline Eigen::Map<Eigen::VectorXd> flat(Positions& p) {
  return {p.data(), p.size()};
}
inline Eigen::Map<const Eigen::VectorXd> flat(const Positions& p) {
  return {p.data(), p.size()};
}

}  // namespace atomopt
