#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "atomopt/potentials.hpp"
#include "atomopt/rng.hpp"
#include "atomopt/types.hpp"

namespace atomopt::tasks {

struct InitRecipe {
  double box_edge = 0.0;       // free-space uniform box when lattice_cells == 0
  int lattice_cells = 0;       // diamond cells per edge (periodic init)
  double lattice_cell_edge = 0.0;
};

/// One inner-loop problem: a potential, a composition, an initialization
/// recipe and (once computed) the energy normalization constant.
struct TaskSpec {
  std::string name;
  potentials::PotentialSpec potential;
  std::vector<std::pair<int, int>> composition;  // (species id, count)
  std::vector<std::string> species_names;
  InitRecipe init;
  long inner_steps = 50000;
  std::optional<double> normalizer;     // |best reference-optimizer energy|
  std::optional<double> gm_reference;   // known global-minimum energy

  Eigen::Index total_atoms() const;
  std::vector<int> species_vector() const;
};

/// Published second-moment coefficient row, stored verbatim. assign_params()
/// maps the two prefactor columns onto the standard convention (pair
/// repulsion A, hopping integral xi); the assignment is calibrated against
/// the Au55 reference minimum.
struct GuptaTableRow {
  std::string s1, s2;
  double p, q, d0, col_a, col_xi;
};

const std::vector<GuptaTableRow>& builtin_gupta_rows(const std::string& series);
potentials::GuptaPairParams assign_params(const GuptaTableRow& row);
potentials::StillingerWeber builtin_sw_params();

/// Task registry. Accepted names: lj{N} for 2<=N<=100; au55; si64; and
/// {agau,agpt,pdau,pdpt}{m} for 0<=m<=38 (38-atom bimetallics, m atoms of
/// the second element). Throws std::invalid_argument on unknown names.
TaskSpec builtin_task(const std::string& name);

/// Raw random placement before pre-optimization (box, or uniform inside the
/// periodic cell for lattice tasks).
Configuration initial_placement(const TaskSpec& task, RngStream rng);

/// Random placement followed by 1000 gradient-descent steps (lr 1e-3) on a
/// unit soft-sphere potential, which removes overlaps deterministically.
Configuration harmonic_init(const TaskSpec& task, RngStream rng);

/// |lowest final energy| of `n_inits` reference Adam runs (lr 0.01,
/// inner_steps steps each) from harmonic initializations. Throws if every
/// run diverges or the best energy is not negative.
double compute_normalizer(const TaskSpec& task, RngStream rng,
                          int n_inits = 150, int workers = 0);

inline double normalize(double energy, double normalizer) {
  return energy / normalizer;
}

/// Normalizer cache: human-readable JSON keyed by (task, seed, inner_steps).
struct NormalizerKey {
  std::string task;
  std::uint64_t seed = 0;
  long inner_steps = 0;
  auto operator<=>(const NormalizerKey&) const = default;
};

class NormalizerCache {
 public:
  static NormalizerCache load(const std::string& path);  // empty if absent
  void save(const std::string& path) const;
  std::optional<double> get(const NormalizerKey& key) const;
  void put(const NormalizerKey& key, double value);
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<NormalizerKey, double> entries_;
};

}  // namespace atomopt::tasks
