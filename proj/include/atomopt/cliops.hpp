#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atomopt/learnedopt.hpp"
#include "atomopt/potentials.hpp"
#include "atomopt/tasks.hpp"

namespace atomopt::cli {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

struct TrainSection {
  std::string strategy = "ga";
  double sigma = 0.1;
  int population = 80;
  long inner_steps = 50000;
  int batch_target = 80;
  int ga_batch = 8;
  double outer_lr = 0.01;
  double lr_decay = 0.98;
  int decay_every = 10;
  int total_updates = 1000;
  int checkpoint_every = 25;
  std::vector<std::string> tasks = {"lj13"};
  std::string resume;

  bool operator==(const TrainSection&) const = default;
};

struct EvalSection {
  std::string task = "lj13";
  std::string optimizer = "adam";
  std::string checkpoint;
  int inits = 150;
  long steps = 0;  // 0 = task default
  int bh_basins = 10;
  double bh_step_scale = 0.0;  // 0 = tuned cache, then default
  double lr = 0.0;             // 0 = tuned cache, then default

  bool operator==(const EvalSection&) const = default;
};

struct HullSection {
  std::string series = "agau";
  std::string optimizer = "bh";
  std::string checkpoint;
  int inits = 20;
  long steps = 0;
  int bh_multiplier = 1;

  bool operator==(const HullSection&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out = "runs/default";
  learned::FeatureConfig features;
  TrainSection train;
  EvalSection eval;
  HullSection hull;

  bool operator==(const RunConfig&) const = default;

  std::string caches_dir() const { return out + "/caches"; }
  std::string reports_dir() const { return out + "/reports"; }
  std::string normalizer_cache_path() const {
    return caches_dir() + "/normalizers.json";
  }
  std::string tuned_cache_path() const { return caches_dir() + "/tuned.json"; }
};

/// Strict parse: unknown keys anywhere in the document are rejected.
RunConfig parse_run_config(const std::string& json_text);
std::string serialize_run_config(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

struct ForceCheckResult {
  int trials = 0;
  double worst_rel = 0.0;
  int worst_trial = -1;
  int worst_atom = -1;
  int worst_axis = -1;
  bool pass = false;
};

/// Analytic forces vs central finite differences (h) on `trials` random
/// non-degenerate configurations drawn from the task's initializer.
ForceCheckResult check_forces_on(const tasks::TaskSpec& task,
                                 const potentials::PotentialSpec& pot,
                                 bool preoptimize, int trials,
                                 std::uint64_t seed, double h = 1e-5,
                                 double tol = 1e-6, int workers = 0);

int cmd_normalize(const RunConfig& cfg, int n_inits);
int cmd_tune(const RunConfig& cfg, const std::string& family, int meta_steps,
             int k_inits);
int cmd_train(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_hull(const RunConfig& cfg);
int cmd_check_forces(const RunConfig& cfg, int trials);

}  // namespace atomopt::cli
