#pragma once

#include <Eigen/Dense>
#include <string>
#include <variant>
#include <vector>

#include "atomopt/rng.hpp"
#include "atomopt/tasks.hpp"
#include "atomopt/types.hpp"

namespace atomopt::optimizers {

struct EnergySample {
  long step;
  double energy;
};

/// One optimization run: energies sampled at a stride, the end state and a
/// divergence flag. Diverged runs report the last finite energy seen.
struct Trajectory {
  std::vector<EnergySample> samples;
  Configuration final_config;
  double final_energy = 0.0;
  long steps = 0;
  bool diverged = false;
};

struct GdParams {
  double lr = 0.001;
};

struct AdamParams {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Positions m, v;
  long t = 0;
  static AdamState like(const Configuration& config);
};

struct FireParams {
  double dt0 = 0.01;
  double dt_max = 0.1;  // 10 * dt0 by convention
  double alpha_start = 0.1;
  double f_inc = 1.1;
  double f_dec = 0.5;
  double f_alpha = 0.99;
  int n_min = 5;
  static FireParams from_lr(double lr);
};

struct FireState {
  Positions velocity;
  double dt = 0.0;
  double alpha = 0.0;
  int steps_uphill_free = 0;  // consecutive steps with positive power
  static FireState like(const Configuration& config, const FireParams& params);
};

using LocalOptimizer = std::variant<GdParams, AdamParams, FireParams>;

// Single-step updates. Positions move by +lr*force for GD (forces are -grad),
// by the bias-corrected Adam rule on gradients, and by velocity-mixed
// semi-implicit Euler for FIRE.
Configuration gd_step(const Configuration& config, const Positions& forces,
                      double lr);
std::pair<Configuration, AdamState> adam_step(const Configuration& config,
                                              const Positions& grads,
                                              AdamState state,
                                              const AdamParams& params);
std::pair<Configuration, FireState> fire_step(const Configuration& config,
                                              const Positions& forces,
                                              FireState state,
                                              const FireParams& params);

// In-place kernels used by the run loops.
void gd_step_inplace(Positions& x, const Positions& forces, double lr);
void adam_step_inplace(Positions& x, const Positions& grads, AdamState& state,
                       const AdamParams& params);
void fire_step_inplace(Positions& x, const Positions& forces, FireState& state,
                       const FireParams& params);

/// Applies `steps` updates, sampling energy at step 0, every `stride` steps
/// and at the end. Divergence (non-finite energy or forces) stops the run
/// and is recorded as data, not an error.
Trajectory run(const tasks::TaskSpec& task, const LocalOptimizer& opt,
               const Configuration& init, long steps, long stride);

/// Greedy basin hopping: Adam descents (lr 1e-2 by default) alternating with
/// Gaussian perturbations of every coordinate; a proposal is accepted only
/// if it improves the incumbent minimum. Samples hold the incumbent energy
/// after each basin.
Trajectory basin_hopping(const tasks::TaskSpec& task, const Configuration& init,
                         int n_basins, long steps_per_basin, double step_scale,
                         RngStream rng, double adam_lr = 1e-2);

enum class TuneFamily { adam, fire, bh };

std::string family_name(TuneFamily family);

struct GridPoint {
  double value;       // lr for adam/fire, step scale for bh
  double mean_final;  // mean final energy over the shared init set
};

struct GridResult {
  TuneFamily family = TuneFamily::adam;
  double best_value = 0.0;
  std::vector<GridPoint> points;
};

/// Grid search over lr {0.01, 0.005, 0.001} (adam, fire) or step scale
/// {0.2, 0.4, 0.6, 0.8} (bh), each scored by mean final energy over
/// `k_inits` shared harmonic initializations. Ties go to the smaller value.
GridResult tune_grid(const tasks::TaskSpec& task, TuneFamily family,
                     RngStream rng, int k_inits = 20, int workers = 0);

struct ScalarMetaResult {
  TuneFamily family = TuneFamily::adam;
  Eigen::VectorXd best_raw;    // reparameterized scalar vector
  double best_loss = 0.0;      // mean final energy on the shared init set
  std::vector<double> decoded; // natural-scale scalars
};

/// Tunes the flat scalar vector of an optimizer family (e.g. Adam's lr,
/// beta1, beta2, eps) with the antithetic ES estimator against mean final
/// energy on a fixed init set, starting from `start`. Scalars live in an
/// unconstrained space (log / logistic transforms) so every iterate is
/// valid. Returns the best-seen vector, which can never score worse than
/// the starting point on that init set.
ScalarMetaResult tune_scalar_meta(const tasks::TaskSpec& task, TuneFamily family,
                                  const LocalOptimizer& start, double bh_step_scale,
                                  int outer_steps, RngStream rng, int k_inits = 20,
                                  int n_pairs = 2, int workers = 0);

/// Decodes a scalar-meta vector back into an optimizer (adam/fire) or a
/// basin-hopping step scale.
LocalOptimizer decode_local(TuneFamily family, const Eigen::VectorXd& raw);
double decode_bh_scale(const Eigen::VectorXd& raw);

/// Tuned-hyperparameter cache, same JSON idiom as the normalizer cache.
struct TunedEntry {
  std::string task;
  std::string family;
  double grid_value = 0.0;
  std::vector<double> meta_scalars;  // empty when meta stage was skipped
  double grid_mean = 0.0;
  double meta_mean = 0.0;
  std::string winner;  // "grid" or "meta"
};

class TunedCache {
 public:
  static TunedCache load(const std::string& path);
  void save(const std::string& path) const;
  const TunedEntry* get(const std::string& task, const std::string& family) const;
  void put(const TunedEntry& entry);
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<TunedEntry> entries_;
};

}  // namespace atomopt::optimizers
