#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "atomopt/baselines.hpp"
#include "atomopt/rng.hpp"
#include "atomopt/tasks.hpp"
#include "atomopt/types.hpp"

namespace atomopt::learned {

/// Featurization and architecture knobs. Defaults match the reference
/// training setup; the per-feature flags exist for ablation studies.
struct FeatureConfig {
  std::vector<double> etas = {0.0009, 0.01, 0.02, 0.035, 0.06, 0.1, 0.2, 0.4};
  double radial_cutoff = 2.5;
  double logmag_p = 10.0;
  std::vector<double> timescales = {1, 3, 10, 30, 100, 300, 1000, 3000, 10000};
  std::vector<double> decays = {0.9, 0.99, 0.999};
  int max_species = 4;
  std::vector<int> hidden = {32, 32};

  bool use_gradients = true;
  bool use_positions = true;
  bool use_decays = true;
  bool use_adam_like = true;
  bool use_particle_count = true;
  bool use_species = true;
  bool use_sine = true;
  bool use_radial = true;
  bool centroid_relative_positions = false;

  /// Per-coordinate feature width. Everything except species one-hots and
  /// sine features expands to (log-magnitude, direction) pairs.
  int feature_count() const;

  bool operator==(const FeatureConfig&) const = default;
};

/// MLP weights plus the output scalars of the gated update
/// dx = alpha * d * sigmoid(beta * m + gamma).
struct LearnedOptParams {
  std::vector<Eigen::MatrixXd> weights;  // layer l: (out_l x in_l)
  std::vector<Eigen::VectorXd> biases;
  double alpha = 0.1;
  double beta = 1.0;
  double gamma = -3.0;

  Eigen::Index n_scalars() const;
};

/// Per-coordinate EMA accumulators, one column per decay constant, and the
/// inner step counter.
struct LearnedOptState {
  Eigen::MatrixXd m;  // 3N x n_decays
  Eigen::MatrixXd v;  // 3N x n_decays
  long t = 0;

  static LearnedOptState like(const Configuration& config,
                              const FeatureConfig& fc);
};

/// (log|x|/p, sign(x)) for |x| > exp(-p), else (-1, x*exp(p)); continuous at
/// the seam.
std::pair<double, double> logmag(double x, double p);

/// Gaussian-kernel neighborhood descriptors with a smooth cosine cutoff:
/// one column per (neighbor species, eta) channel, species-major. N x (S*E).
Eigen::MatrixXd radial_features(const Configuration& config,
                                const FeatureConfig& fc);

/// Per-coordinate feature matrix (3N x F). Fixed column order: gradient;
/// position; per decay m_k then v_k; per decay bias-corrected
/// m^_k/(sqrt(v^_k)+1e-8) then 1/(sqrt(v^_k)+1e-8); atom count; species
/// one-hot; sin(t/tau) per timescale; radial channels of the owning atom.
/// State EMAs must already include the current gradients.
Eigen::MatrixXd build_features(const Configuration& config,
                               const Positions& grads,
                               const LearnedOptState& state,
                               const FeatureConfig& fc);

/// Two-output-per-coordinate MLP with rectified-linear hidden layers.
/// Returns (m, d), each of length 3N.
std::pair<Eigen::VectorXd, Eigen::VectorXd> mlp_forward(
    const Eigen::MatrixXd& features, const LearnedOptParams& params);

/// One update of the learned optimizer: forces -> EMA update -> features ->
/// MLP -> gated position update; increments the step counter.
std::pair<Configuration, LearnedOptState> learned_step(
    const Configuration& config, const potentials::PotentialSpec& spec,
    LearnedOptState state, const LearnedOptParams& params,
    const FeatureConfig& fc);

/// LeCun-normal hidden layers, zero output layer, default output scalars.
LearnedOptParams init_params(const FeatureConfig& fc, RngStream rng);

struct UnrollResult {
  double normalized_final = 0.0;
  optimizers::Trajectory trajectory;
};

/// Raw-energy unroll of the learned optimizer; same sampling and divergence
/// contract as optimizers::run.
optimizers::Trajectory run_learned(const tasks::TaskSpec& task,
                                   const LearnedOptParams& params,
                                   const FeatureConfig& fc,
                                   const Configuration& init, long steps,
                                   long stride);

/// Unroll returning the normalized final energy; requires task.normalizer.
UnrollResult unroll(const tasks::TaskSpec& task, const LearnedOptParams& params,
                    const FeatureConfig& fc, const Configuration& init,
                    long steps, long log_stride);

/// Runs the full state/feature/MLP pipeline with positions frozen and
/// returns the per-step update norms |dx|_2 (updates are never applied).
std::vector<double> probe_at_minimum(const tasks::TaskSpec& task,
                                     const LearnedOptParams& params,
                                     const FeatureConfig& fc,
                                     const Configuration& gm_config, long steps);

// Flat parameter vector (layer weights row-major, then biases, then
// alpha/beta/gamma) used by the outer-loop optimizers.
Eigen::VectorXd to_vector(const LearnedOptParams& params);
LearnedOptParams from_vector(const FeatureConfig& fc, const Eigen::VectorXd& v);

/// Versioned JSON checkpoint; round-trips weights bit-exactly.
struct Checkpoint {
  LearnedOptParams params;
  FeatureConfig features;
  std::uint64_t seed = 0;
  long update_index = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace atomopt::learned
