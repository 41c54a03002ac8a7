#pragma once

#include <string>
#include <vector>

#include "atomopt/esgrad.hpp"
#include "atomopt/learnedopt.hpp"
#include "atomopt/rng.hpp"
#include "atomopt/tasks.hpp"

namespace atomopt::meta {

enum class Strategy { es, esmc, ga };

Strategy strategy_from_string(const std::string& name);
std::string strategy_name(Strategy s);

struct MetaConfig {
  Strategy strategy = Strategy::esmc;
  double sigma = 0.1;
  int population = 80;  // es/esmc: 2 * antithetic pairs; ga: members
  long inner_steps = 50000;
  int batch_target = 80;
  int ga_batch = 8;
  double outer_lr0 = 1e-2;
  double lr_decay = 0.98;
  int decay_every = 10;
  int total_updates = 1000;
  int checkpoint_every = 25;
  std::vector<std::string> task_names = {"lj13"};
  std::uint64_t seed = 0;
  int workers = 0;
  learned::FeatureConfig features;
};

/// One task instantiation: the task plus a harmonic initialization.
struct TaskInstance {
  const tasks::TaskSpec* task;
  Configuration init;
};
using Batch = std::vector<TaskInstance>;

/// floor(target / m) harmonic initializations of each of the m tasks.
Batch sample_batch(const std::vector<tasks::TaskSpec>& task_list, int target,
                   RngStream rng);

/// Mean normalized final-step energy over the batch; diverged unrolls
/// contribute their last finite normalized energy.
double meta_loss(const learned::LearnedOptParams& params,
                 const learned::FeatureConfig& fc, const Batch& batch,
                 int workers = 1, EvalCounters* counters = nullptr);

/// Antithetic ES estimate on unroll meta-losses. Pair k is scored on the
/// strided sub-batch {i : i mod n_pairs == k}, so both signs share
/// initializations.
Eigen::VectorXd es_gradient(const learned::LearnedOptParams& params,
                            const learned::FeatureConfig& fc, const Batch& batch,
                            double sigma, int n_pairs, RngStream rng,
                            EvalCounters* counters = nullptr, int workers = 1);

/// Clipped variant; every perturbed loss is capped at the unperturbed loss
/// of the same sub-batch. `baseline_mean` receives mean L(theta).
Eigen::VectorXd esmc_gradient(const learned::LearnedOptParams& params,
                              const learned::FeatureConfig& fc, const Batch& batch,
                              double sigma, int n_pairs, RngStream rng,
                              EvalCounters* counters = nullptr, int workers = 1,
                              double* baseline_mean = nullptr);

struct GaOutcome {
  learned::LearnedOptParams params;   // accepted parameters
  double incumbent_loss = 0.0;        // loss of the input params on the batch
  double accepted_loss = 0.0;         // loss of the returned params
  int accepted_index = -1;            // -1 when the incumbent was kept
};

/// Elitist generation: population_size Gaussian candidates, all scored on
/// the same batch; the best replaces the incumbent only when it wins.
GaOutcome ga_generation(const learned::LearnedOptParams& params,
                        const learned::FeatureConfig& fc, int population_size,
                        double sigma, const Batch& batch, RngStream rng,
                        EvalCounters* counters = nullptr, int workers = 1);

struct TrainLogRow {
  int update = 0;
  double meta_loss = 0.0;
  double best_meta_loss = 0.0;
  double outer_lr = 0.0;
  double wall_ms = 0.0;
  int diverged_unrolls = 0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  std::string to_tsv() const;
};

struct TrainOutputs {
  learned::LearnedOptParams final_params;
  learned::LearnedOptParams best_params;
  double best_loss = 0.0;
  TrainLog log;
  EvalCounters counters;
};

/// Runs cfg.total_updates meta-updates of the selected strategy. Tasks are
/// instantiated from the registry with cfg.inner_steps and must all have a
/// cached normalizer supplied via `normalizers` (|task_names|-sized).
/// Checkpoints (JSON) and the train log (TSV) land under out_dir when it is
/// non-empty; `resume_from` restarts from a trainer-state file. Results are
/// bit-identical for a given seed regardless of worker count.
TrainOutputs train(const MetaConfig& cfg, const std::vector<double>& normalizers,
                   const std::string& out_dir = "",
                   const std::string& resume_from = "");

}  // namespace atomopt::meta
