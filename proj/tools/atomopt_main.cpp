#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "atomopt/cliops.hpp"

using atomopt::cli::RunConfig;

int main(int argc, char** argv) {
  CLI::App app{"atomopt: global optimization of atomic structures with "
               "classical and learned optimizers"};
  app.require_subcommand(1);

  std::string config_path;
  RunConfig cfg;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out;

  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "global random seed");
  app.add_option("--workers", workers,
                 "worker threads (also ATOMOPT_WORKERS; 0 = auto)");
  app.add_option("--out", out, "output directory");

  auto* normalize = app.add_subcommand(
      "normalize", "compute and cache the per-task energy normalizer");
  std::string task;
  long steps = 0;
  int inits = 150;
  normalize->add_option("--task", task, "task name (e.g. lj13)");
  normalize->add_option("--steps", steps, "inner steps (default: task)");
  normalize->add_option("--inits", inits, "number of reference runs");

  auto* tune = app.add_subcommand("tune", "tune a baseline optimizer family");
  std::string family = "adam";
  int meta_steps = 0;
  int tune_inits = 20;
  tune->add_option("--task", task, "task name");
  tune->add_option("--family", family, "adam | fire | bh");
  tune->add_option("--meta-steps", meta_steps,
                   "scalar meta-tuning outer steps (0 = grid only)");
  tune->add_option("--inits", tune_inits, "initializations per grid point");

  auto* train = app.add_subcommand("train", "meta-train a learned optimizer");
  std::string strategy;
  train->add_option("--strategy", strategy, "es | esmc | ga");
  std::string resume;
  train->add_option("--resume", resume, "trainer-state file to resume from");

  auto* eval = app.add_subcommand("eval", "benchmark an optimizer on a task");
  std::string optimizer;
  std::string ckpt;
  long eval_steps = 0;
  int eval_inits = 0;
  double bh_scale = 0.0;
  double lr = 0.0;
  eval->add_option("--task", task, "task name");
  eval->add_option("--optimizer", optimizer, "gd | adam | fire | bh | learned");
  eval->add_option("--ckpt", ckpt, "learned-optimizer checkpoint");
  eval->add_option("--inits", eval_inits, "number of initializations");
  eval->add_option("--steps", eval_steps, "inner steps (default: task)");
  eval->add_option("--bh-step-scale", bh_scale, "basin-hopping step scale");
  eval->add_option("--lr", lr, "learning rate override");

  auto* hull = app.add_subcommand(
      "hull", "formation-energy convex hull over a bimetallic series");
  std::string series;
  int bh_multiplier = 0;
  int hull_inits = 0;
  hull->add_option("--series", series, "agau | agpt | pdau | pdpt");
  hull->add_option("--optimizer", optimizer, "gd | adam | fire | bh | learned");
  hull->add_option("--ckpt", ckpt, "learned-optimizer checkpoint");
  hull->add_option("--inits", hull_inits, "initializations per composition");
  hull->add_option("--bh-multiplier", bh_multiplier,
                   "extra step budget multiplier for basin hopping");

  auto* check = app.add_subcommand("check-forces",
                                   "validate analytic forces against finite "
                                   "differences");
  int trials = 100;
  check->add_option("--task", task, "task name");
  check->add_option("--trials", trials, "number of random configurations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : atomopt::cli::kExitUsage;
  }

  try {
    if (!config_path.empty()) cfg = atomopt::cli::load_run_config(config_path);
    if (app.count("--seed")) cfg.seed = seed;
    if (app.count("--workers")) cfg.workers = workers;
    if (app.count("--out")) cfg.out = out;

    if (normalize->parsed()) {
      if (normalize->count("--task")) cfg.eval.task = task;
      if (normalize->count("--steps")) cfg.eval.steps = steps;
      return atomopt::cli::cmd_normalize(cfg, inits);
    }
    if (tune->parsed()) {
      if (tune->count("--task")) cfg.eval.task = task;
      return atomopt::cli::cmd_tune(cfg, family, meta_steps, tune_inits);
    }
    if (train->parsed()) {
      if (train->count("--strategy")) cfg.train.strategy = strategy;
      if (train->count("--resume")) cfg.train.resume = resume;
      return atomopt::cli::cmd_train(cfg);
    }
    if (eval->parsed()) {
      if (eval->count("--task")) cfg.eval.task = task;
      if (eval->count("--optimizer")) cfg.eval.optimizer = optimizer;
      if (eval->count("--ckpt")) cfg.eval.checkpoint = ckpt;
      if (eval->count("--inits")) cfg.eval.inits = eval_inits;
      if (eval->count("--steps")) cfg.eval.steps = eval_steps;
      if (eval->count("--bh-step-scale")) cfg.eval.bh_step_scale = bh_scale;
      if (eval->count("--lr")) cfg.eval.lr = lr;
      return atomopt::cli::cmd_eval(cfg);
    }
    if (hull->parsed()) {
      if (hull->count("--series")) cfg.hull.series = series;
      if (hull->count("--optimizer")) cfg.hull.optimizer = optimizer;
      if (hull->count("--ckpt")) cfg.hull.checkpoint = ckpt;
      if (hull->count("--inits")) cfg.hull.inits = hull_inits;
      if (hull->count("--bh-multiplier")) cfg.hull.bh_multiplier = bh_multiplier;
      return atomopt::cli::cmd_hull(cfg);
    }
    if (check->parsed()) {
      if (check->count("--task")) cfg.eval.task = task;
      return atomopt::cli::cmd_check_forces(cfg, trials);
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return atomopt::cli::kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return atomopt::cli::kExitNumerical;
  }
  return atomopt::cli::kExitUsage;
}
