#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <variant>

#include "atomopt/types.hpp"

namespace atomopt::potentials {

/// Reduced units by default (epsilon = d0 = 1).
struct LennardJones {
  double epsilon = 1.0;
  double d0 = 1.0;
};

/// Second-moment (tight-binding) pair coefficients. A is the pair repulsion
/// prefactor and xi the effective hopping integral, both in eV; d0 in
/// angstrom; p and q dimensionless.
struct GuptaPairParams {
  double p = 0.0;
  double q = 0.0;
  double d0 = 1.0;
  double A = 0.0;
  double xi = 0.0;
};

/// Symmetric map from unordered species pair to coefficients.
class PairParamTable {
 public:
  void set(int s1, int s2, const GuptaPairParams& params);
  bool has(int s1, int s2) const;
  /// Throws std::invalid_argument if the pair has no entry.
  const GuptaPairParams& lookup(int s1, int s2) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<std::pair<int, int>, GuptaPairParams>& entries() const {
    return entries_;
  }

 private:
  std::map<std::pair<int, int>, GuptaPairParams> entries_;
};

struct Gupta {
  PairParamTable table;
};

struct StillingerWeber {
  double A = 7.049;
  double epsilon = 2.168;  // eV
  double B = 0.602;
  double p = 4.0;
  double q = 0.0;
  double lambda = 21.0;
  double gamma = 1.2;
  double sigma = 2.0951;  // angstrom
  double a = 1.8;
  double cos_theta0 = -1.0 / 3.0;
  double r_cut = 3.77;  // angstrom; must be <= a * sigma

  double hard_cutoff() const { return a * sigma; }
};

/// Finite-everywhere overlap penalty used for pre-optimization.
struct SoftSphere {
  double epsilon = 1.0;
  double alpha = 2.0;
  double sigma_d = 1.0;
};

using PotentialSpec =
    std::variant<LennardJones, Gupta, StillingerWeber, SoftSphere>;

/// Divergence sentinel: non-finite energies mark broken configurations
/// (coincident atoms, exploded trajectories) and are never compared.
inline bool diverged(double energy) { return !std::isfinite(energy); }

double lj_energy(const Configuration& config, const LennardJones& spec);
double gupta_energy(const Configuration& config, const Gupta& spec);
double sw_energy(const Configuration& config, const StillingerWeber& spec);
double soft_sphere_energy(const Configuration& config, const SoftSphere& spec);

double energy(const Configuration& config, const PotentialSpec& spec);

/// -dE/dx, analytic for every variant. Writes into `out` (resized as needed).
void forces_into(const Configuration& config, const PotentialSpec& spec,
                 Positions& out);
Positions forces(const Configuration& config, const PotentialSpec& spec);

/// Central-difference estimate of dE/dx, one coordinate at a time.
Positions numerical_gradient(const Configuration& config,
                             const PotentialSpec& spec, double h);

/// Largest pair distance that can contribute energy, or +inf for the
/// all-pairs cluster potentials. Used to validate minimum-image cells.
double interaction_cutoff(const PotentialSpec& spec);

}  // namespace atomopt::potentials
