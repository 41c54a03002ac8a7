#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "atomopt/baselines.hpp"
#include "atomopt/learnedopt.hpp"
#include "atomopt/tasks.hpp"

namespace atomopt::bench {

struct BhSpec {
  int n_basins = 10;
  double step_scale = 0.4;
  double adam_lr = 1e-2;
};

struct LearnedSpec {
  learned::LearnedOptParams params;
  learned::FeatureConfig features;
  std::string label = "learned";
};

using OptimizerSpec = std::variant<optimizers::GdParams, optimizers::AdamParams,
                                   optimizers::FireParams, BhSpec, LearnedSpec>;

std::string optimizer_name(const OptimizerSpec& opt);

/// 1000 gradient-descent steps at lr 1e-3 on the task potential. Divergence
/// returns the input configuration and sets *flagged.
Configuration polish(const Configuration& config, const tasks::TaskSpec& task,
                     bool* flagged = nullptr);

struct HistBin {
  double lo;
  double hi;
  int count;
};

struct EvalReport {
  std::string task;
  std::string optimizer;
  std::uint64_t seed = 0;
  long inner_steps = 0;
  int n_inits = 0;
  std::vector<double> finals;  // post-polish energy per initialization
  double min_energy = 0.0;
  double mean_energy = 0.0;
  std::optional<double> gm_reference;
  int gm_hits = 0;
  int diverged = 0;
  std::vector<HistBin> histogram;
};

struct EvalOptions {
  int n_inits = 150;
  std::uint64_t seed = 0;
  int workers = 0;
  double gm_tol = 0.01;       // eV
  double hist_width = 0.5;    // eV
  bool apply_polish = true;
};

/// Multi-initialization benchmark: harmonic init -> step-matched run ->
/// polish -> statistics. Deterministic under (task, optimizer, seed,
/// n_inits), independent of worker count.
EvalReport evaluate(const tasks::TaskSpec& task, const OptimizerSpec& opt,
                    const EvalOptions& options);

int gm_hit_count(const std::vector<double>& finals, double gm_reference,
                 double tol = 0.01);

std::vector<HistBin> histogram(const std::vector<double>& finals, double anchor,
                               double width);

/// E minus the composition-weighted pure-endpoint energies.
double formation_energy(double e, int m, int n, double e_pure_a,
                        double e_pure_b);

struct HullPoint {
  double x;  // composition fraction in [0, 1]
  double y;  // formation energy
};

/// Vertices of the lower convex envelope; interior collinear points are
/// excluded. Requires points at x=0 and x=1.
std::vector<HullPoint> lower_convex_hull(std::vector<HullPoint> points);

struct HullRow {
  std::string task;
  int m = 0;
  int n = 0;
  double raw_energy = 0.0;
  double formation = 0.0;
  bool on_hull = false;
};

struct HullReport {
  std::string series;
  std::string optimizer;
  std::uint64_t seed = 0;
  double e_pure_a = 0.0;
  double e_pure_b = 0.0;
  std::vector<HullRow> rows;
};

/// Builds the formation-energy report from per-composition best energies
/// (m = count of the second species, n = total atoms). Pure endpoints m=0
/// and m=n must be present; their formation energies are exactly zero.
HullReport hull_report(const std::string& series, const std::string& optimizer,
                       std::uint64_t seed,
                       const std::vector<std::tuple<std::string, int, int, double>>&
                           compositions);

struct BenchmarkEntry {
  std::string name;
  OptimizerSpec opt;
  std::optional<long> steps_override;  // must agree across entries
};

struct BenchmarkRow {
  std::string task;
  std::string optimizer;
  double min_energy;
  double mean_energy;
  int gm_hits;
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;
  long inner_steps = 0;
};

/// Min/Mean per (task, optimizer) under one shared step budget; mismatched
/// budgets are rejected before any computation runs.
BenchmarkTable benchmark_table(const std::vector<tasks::TaskSpec>& task_list,
                               const std::vector<BenchmarkEntry>& optimizers,
                               int n_inits, std::uint64_t seed, int workers = 0);

// Columnar exports; schemas documented in the README. Re-exporting identical
// data yields byte-identical files.
std::string report_summary_json(const EvalReport& report);
std::string report_finals_tsv(const EvalReport& report);
std::string report_hist_tsv(const EvalReport& report);
std::string trajectory_tsv(const optimizers::Trajectory& traj);
std::string hull_tsv(const HullReport& report);
std::string benchmark_tsv(const BenchmarkTable& table);

void export_report(const std::string& dir, const EvalReport& report);

}  // namespace atomopt::bench
