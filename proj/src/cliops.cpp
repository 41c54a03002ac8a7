#include "atomopt/cliops.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "atomopt/baselines.hpp"
#include "atomopt/evaluate.hpp"
#include "atomopt/jsonfmt.hpp"
#include "atomopt/metatrain.hpp"
#include "atomopt/parallel.hpp"
#include "atomopt/textio.hpp"

namespace atomopt::cli {

using nlohmann::ordered_json;

namespace {

void reject_unknown_keys(const ordered_json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw std::invalid_argument("config: unknown key \"" + key + "\" in " + where);
    }
  }
}

template <typename T>
void maybe(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void apply_feature_overrides(learned::FeatureConfig& fc, const ordered_json& j) {
  reject_unknown_keys(
      j,
      {"etas", "radial_cutoff", "logmag_p", "timescales", "decays", "max_species",
       "hidden", "use_gradients", "use_positions", "use_decays", "use_adam_like",
       "use_particle_count", "use_species", "use_sine", "use_radial",
       "centroid_relative_positions"},
      "features");
  maybe(j, "etas", fc.etas);
  maybe(j, "radial_cutoff", fc.radial_cutoff);
  maybe(j, "logmag_p", fc.logmag_p);
  maybe(j, "timescales", fc.timescales);
  maybe(j, "decays", fc.decays);
  maybe(j, "max_species", fc.max_species);
  maybe(j, "hidden", fc.hidden);
  maybe(j, "use_gradients", fc.use_gradients);
  maybe(j, "use_positions", fc.use_positions);
  maybe(j, "use_decays", fc.use_decays);
  maybe(j, "use_adam_like", fc.use_adam_like);
  maybe(j, "use_particle_count", fc.use_particle_count);
  maybe(j, "use_species", fc.use_species);
  maybe(j, "use_sine", fc.use_sine);
  maybe(j, "use_radial", fc.use_radial);
  maybe(j, "centroid_relative_positions", fc.centroid_relative_positions);
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  const auto j = ordered_json::parse(json_text);
  RunConfig cfg;
  reject_unknown_keys(j, {"seed", "workers", "out", "features", "train", "eval", "hull"},
                      "top level");
  maybe(j, "seed", cfg.seed);
  maybe(j, "workers", cfg.workers);
  maybe(j, "out", cfg.out);
  if (j.contains("features")) apply_feature_overrides(cfg.features, j.at("features"));
  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown_keys(t,
                        {"strategy", "sigma", "population", "inner_steps",
                         "batch_target", "ga_batch", "outer_lr", "lr_decay",
                         "decay_every", "total_updates", "checkpoint_every",
                         "tasks", "resume"},
                        "train");
    maybe(t, "strategy", cfg.train.strategy);
    maybe(t, "sigma", cfg.train.sigma);
    maybe(t, "population", cfg.train.population);
    maybe(t, "inner_steps", cfg.train.inner_steps);
    maybe(t, "batch_target", cfg.train.batch_target);
    maybe(t, "ga_batch", cfg.train.ga_batch);
    maybe(t, "outer_lr", cfg.train.outer_lr);
    maybe(t, "lr_decay", cfg.train.lr_decay);
    maybe(t, "decay_every", cfg.train.decay_every);
    maybe(t, "total_updates", cfg.train.total_updates);
    maybe(t, "checkpoint_every", cfg.train.checkpoint_every);
    maybe(t, "tasks", cfg.train.tasks);
    maybe(t, "resume", cfg.train.resume);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    reject_unknown_keys(e,
                        {"task", "optimizer", "checkpoint", "inits", "steps",
                         "bh_basins", "bh_step_scale", "lr"},
                        "eval");
    maybe(e, "task", cfg.eval.task);
    maybe(e, "optimizer", cfg.eval.optimizer);
    maybe(e, "checkpoint", cfg.eval.checkpoint);
    maybe(e, "inits", cfg.eval.inits);
    maybe(e, "steps", cfg.eval.steps);
    maybe(e, "bh_basins", cfg.eval.bh_basins);
    maybe(e, "bh_step_scale", cfg.eval.bh_step_scale);
    maybe(e, "lr", cfg.eval.lr);
  }
  if (j.contains("hull")) {
    const auto& h = j.at("hull");
    reject_unknown_keys(h,
                        {"series", "optimizer", "checkpoint", "inits", "steps",
                         "bh_multiplier"},
                        "hull");
    maybe(h, "series", cfg.hull.series);
    maybe(h, "optimizer", cfg.hull.optimizer);
    maybe(h, "checkpoint", cfg.hull.checkpoint);
    maybe(h, "inits", cfg.hull.inits);
    maybe(h, "steps", cfg.hull.steps);
    maybe(h, "bh_multiplier", cfg.hull.bh_multiplier);
  }
  return cfg;
}

std::string serialize_run_config(const RunConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  j["out"] = cfg.out;
  j["features"] = learned::feature_config_to_json(cfg.features);
  ordered_json t;
  t["strategy"] = cfg.train.strategy;
  t["sigma"] = cfg.train.sigma;
  t["population"] = cfg.train.population;
  t["inner_steps"] = cfg.train.inner_steps;
  t["batch_target"] = cfg.train.batch_target;
  t["ga_batch"] = cfg.train.ga_batch;
  t["outer_lr"] = cfg.train.outer_lr;
  t["lr_decay"] = cfg.train.lr_decay;
  t["decay_every"] = cfg.train.decay_every;
  t["total_updates"] = cfg.train.total_updates;
  t["checkpoint_every"] = cfg.train.checkpoint_every;
  t["tasks"] = cfg.train.tasks;
  t["resume"] = cfg.train.resume;
  j["train"] = t;
  ordered_json e;
  e["task"] = cfg.eval.task;
  e["optimizer"] = cfg.eval.optimizer;
  e["checkpoint"] = cfg.eval.checkpoint;
  e["inits"] = cfg.eval.inits;
  e["steps"] = cfg.eval.steps;
  e["bh_basins"] = cfg.eval.bh_basins;
  e["bh_step_scale"] = cfg.eval.bh_step_scale;
  e["lr"] = cfg.eval.lr;
  j["eval"] = e;
  ordered_json h;
  h["series"] = cfg.hull.series;
  h["optimizer"] = cfg.hull.optimizer;
  h["checkpoint"] = cfg.hull.checkpoint;
  h["inits"] = cfg.hull.inits;
  h["steps"] = cfg.hull.steps;
  h["bh_multiplier"] = cfg.hull.bh_multiplier;
  j["hull"] = h;
  return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(textio::read_file(path));
}

ForceCheckResult check_forces_on(const tasks::TaskSpec& task,
                                 const potentials::PotentialSpec& pot,
                                 bool preoptimize, int trials,
                                 std::uint64_t seed, double h, double tol,
                                 int workers) {
  ForceCheckResult result;
  result.trials = trials;
  const RngStream root = RngStream::root(seed);
  struct Worst {
    double rel = 0.0;
    int trial = -1, atom = -1, axis = -1;
  };
  std::vector<Worst> worst(static_cast<std::size_t>(trials));
  parallel_for(static_cast<std::size_t>(trials), workers, [&](std::size_t i) {
    const Configuration config = preoptimize
                                     ? tasks::harmonic_init(task, root.fork(i))
                                     : tasks::initial_placement(task, root.fork(i));
    const Positions analytic = potentials::forces(config, pot);
    const Positions numeric = potentials::numerical_gradient(config, pot, h);
    const double scale =
        std::max(analytic.array().abs().maxCoeff(), 1e-10);
    Worst w;
    for (Eigen::Index a = 0; a < config.n_atoms(); ++a) {
      for (int k = 0; k < 3; ++k) {
        const double rel = std::abs(analytic(a, k) + numeric(a, k)) / scale;
        if (rel > w.rel) {
          w = {rel, static_cast<int>(i), static_cast<int>(a), k};
        }
      }
    }
    worst[i] = w;
  });
  for (const auto& w : worst) {
    if (w.rel > result.worst_rel) {
      result.worst_rel = w.rel;
      result.worst_trial = w.trial;
      result.worst_atom = w.atom;
      result.worst_axis = w.axis;
    }
  }
  result.pass = result.worst_rel < tol;
  return result;
}

int cmd_normalize(const RunConfig& cfg, int n_inits) {
  tasks::TaskSpec task = tasks::builtin_task(cfg.eval.task);
  if (cfg.eval.steps > 0) task.inner_steps = cfg.eval.steps;
  const tasks::NormalizerKey key{task.name, cfg.seed, task.inner_steps};
  auto cache = tasks::NormalizerCache::load(cfg.normalizer_cache_path());
  if (const auto cached = cache.get(key)) {
    std::printf("normalizer %s seed=%llu steps=%ld cached: %s\n", task.name.c_str(),
                static_cast<unsigned long long>(cfg.seed), task.inner_steps,
                textio::fmt_double(*cached).c_str());
    return kExitOk;
  }
  const double value = tasks::compute_normalizer(task, RngStream::root(cfg.seed),
                                                 n_inits, cfg.workers);
  cache.put(key, value);
  cache.save(cfg.normalizer_cache_path());
  std::printf("normalizer %s seed=%llu steps=%ld computed: %s\n", task.name.c_str(),
              static_cast<unsigned long long>(cfg.seed), task.inner_steps,
              textio::fmt_double(value).c_str());
  return kExitOk;
}

int cmd_tune(const RunConfig& cfg, const std::string& family_name, int meta_steps,
             int k_inits) {
  optimizers::TuneFamily family;
  if (family_name == "adam") family = optimizers::TuneFamily::adam;
  else if (family_name == "fire") family = optimizers::TuneFamily::fire;
  else if (family_name == "bh") family = optimizers::TuneFamily::bh;
  else throw std::invalid_argument("unknown family: " + family_name);

  tasks::TaskSpec task = tasks::builtin_task(cfg.eval.task);
  if (cfg.eval.steps > 0) task.inner_steps = cfg.eval.steps;
  const RngStream rng = RngStream::root(cfg.seed).fork(0x7E);

  const auto grid = optimizers::tune_grid(task, family, rng, k_inits, cfg.workers);
  double grid_mean = 0.0;
  for (const auto& p : grid.points) {
    if (p.value == grid.best_value) grid_mean = p.mean_final;
  }

  optimizers::TunedEntry entry;
  entry.task = task.name;
  entry.family = family_name;
  entry.grid_value = grid.best_value;
  entry.grid_mean = grid_mean;
  entry.winner = "grid";
  entry.meta_mean = grid_mean;

  if (meta_steps > 0) {
    optimizers::LocalOptimizer start = optimizers::GdParams{};
    if (family == optimizers::TuneFamily::adam) {
      start = optimizers::AdamParams{grid.best_value, 0.9, 0.999, 1e-8};
    } else if (family == optimizers::TuneFamily::fire) {
      start = optimizers::FireParams::from_lr(grid.best_value);
    }
    const auto meta = optimizers::tune_scalar_meta(
        task, family, start, grid.best_value, meta_steps, rng, k_inits, 2,
        cfg.workers);
    entry.meta_scalars = meta.decoded;
    entry.meta_mean = meta.best_loss;
    if (meta.best_loss < grid_mean) entry.winner = "meta";
  }

  auto cache = optimizers::TunedCache::load(cfg.tuned_cache_path());
  cache.put(entry);
  cache.save(cfg.tuned_cache_path());
  std::printf("tuned %s/%s: grid=%s (mean %s) winner=%s\n", task.name.c_str(),
              family_name.c_str(), textio::fmt_double(entry.grid_value).c_str(),
              textio::fmt_double(entry.grid_mean).c_str(), entry.winner.c_str());
  return kExitOk;
}

int cmd_train(const RunConfig& cfg) {
  meta::MetaConfig mc;
  mc.strategy = meta::strategy_from_string(cfg.train.strategy);
  mc.sigma = cfg.train.sigma;
  mc.population = cfg.train.population;
  mc.inner_steps = cfg.train.inner_steps;
  mc.batch_target = cfg.train.batch_target;
  mc.ga_batch = cfg.train.ga_batch;
  mc.outer_lr0 = cfg.train.outer_lr;
  mc.lr_decay = cfg.train.lr_decay;
  mc.decay_every = cfg.train.decay_every;
  mc.total_updates = cfg.train.total_updates;
  mc.checkpoint_every = cfg.train.checkpoint_every;
  mc.task_names = cfg.train.tasks;
  mc.seed = cfg.seed;
  mc.workers = cfg.workers;
  mc.features = cfg.features;

  const auto cache = tasks::NormalizerCache::load(cfg.normalizer_cache_path());
  std::vector<double> normalizers;
  std::vector<std::string> missing;
  for (const auto& name : mc.task_names) {
    const auto value =
        cache.get({name, cfg.seed, mc.inner_steps});
    if (value) {
      normalizers.push_back(*value);
    } else {
      normalizers.push_back(0.0);
      missing.push_back(name);
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing normalizers (run `atomopt normalize`) for:";
    for (const auto& name : missing) msg += " " + name;
    throw std::invalid_argument(msg);
  }

  const auto outputs = meta::train(mc, normalizers, cfg.out, cfg.train.resume);
  std::printf("train done: %d updates, best meta-loss %s, %ld unrolls\n",
              cfg.train.total_updates, textio::fmt_double(outputs.best_loss).c_str(),
              outputs.counters.unrolls);
  return kExitOk;
}

namespace {

bench::OptimizerSpec resolve_optimizer(const RunConfig& cfg,
                                       const std::string& name,
                                       const std::string& checkpoint,
                                       const std::string& task_name,
                                       int bh_basins) {
  const auto tuned = optimizers::TunedCache::load(cfg.tuned_cache_path());
  auto tuned_value = [&](const char* family, double fallback) {
    if (const auto* e = tuned.get(task_name, family)) return e->grid_value;
    return fallback;
  };
  if (name == "gd") {
    return optimizers::GdParams{cfg.eval.lr > 0 ? cfg.eval.lr : 0.001};
  }
  if (name == "adam") {
    const double lr = cfg.eval.lr > 0 ? cfg.eval.lr : tuned_value("adam", 0.01);
    return optimizers::AdamParams{lr, 0.9, 0.999, 1e-8};
  }
  if (name == "fire") {
    const double lr = cfg.eval.lr > 0 ? cfg.eval.lr : tuned_value("fire", 0.01);
    return optimizers::FireParams::from_lr(lr);
  }
  if (name == "bh") {
    const double scale = cfg.eval.bh_step_scale > 0 ? cfg.eval.bh_step_scale
                                                    : tuned_value("bh", 0.4);
    return bench::BhSpec{bh_basins, scale, 1e-2};
  }
  if (name == "learned") {
    if (checkpoint.empty()) {
      throw std::invalid_argument("optimizer \"learned\" requires --ckpt");
    }
    const auto ckpt = learned::load_checkpoint(checkpoint);
    return bench::LearnedSpec{ckpt.params, ckpt.features, "learned"};
  }
  throw std::invalid_argument("unknown optimizer: " + name);
}

}  // namespace

int cmd_eval(const RunConfig& cfg) {
  tasks::TaskSpec task = tasks::builtin_task(cfg.eval.task);
  if (cfg.eval.steps > 0) task.inner_steps = cfg.eval.steps;
  const auto opt = resolve_optimizer(cfg, cfg.eval.optimizer, cfg.eval.checkpoint,
                                     task.name, cfg.eval.bh_basins);
  bench::EvalOptions options;
  options.n_inits = cfg.eval.inits;
  options.seed = cfg.seed;
  options.workers = cfg.workers;
  const auto report = bench::evaluate(task, opt, options);
  bench::export_report(cfg.reports_dir(), report);
  std::printf("eval %s/%s: min %s mean %s hits %d/%d\n", report.task.c_str(),
              report.optimizer.c_str(), textio::fmt_double(report.min_energy).c_str(),
              textio::fmt_double(report.mean_energy).c_str(), report.gm_hits,
              report.n_inits);
  return kExitOk;
}

int cmd_hull(const RunConfig& cfg) {
  static const std::set<std::string> kSeries = {"agau", "agpt", "pdau", "pdpt"};
  if (!kSeries.count(cfg.hull.series)) {
    throw std::invalid_argument("unknown series: " + cfg.hull.series);
  }
  std::vector<std::tuple<std::string, int, int, double>> compositions;
  for (int m = 0; m <= 38; ++m) {
    const std::string name = cfg.hull.series + std::to_string(m);
    tasks::TaskSpec task = tasks::builtin_task(name);
    if (cfg.hull.steps > 0) task.inner_steps = cfg.hull.steps;
    if (cfg.hull.optimizer == "bh" && cfg.hull.bh_multiplier > 1) {
      task.inner_steps *= cfg.hull.bh_multiplier;
    }
    RunConfig sub = cfg;
    sub.eval.task = name;
    const auto opt = resolve_optimizer(sub, cfg.hull.optimizer, cfg.hull.checkpoint,
                                       name, cfg.eval.bh_basins);
    bench::EvalOptions options;
    options.n_inits = cfg.hull.inits;
    options.seed = cfg.seed;
    options.workers = cfg.workers;
    const auto report = bench::evaluate(task, opt, options);
    compositions.emplace_back(name, m, 38, report.min_energy);
  }
  const auto hull = bench::hull_report(cfg.hull.series, cfg.hull.optimizer,
                                       cfg.seed, compositions);
  textio::ensure_dir(cfg.reports_dir());
  const std::string path = cfg.reports_dir() + "/hull_" + cfg.hull.series + "_" +
                           cfg.hull.optimizer + "_s" + std::to_string(cfg.seed) +
                           ".tsv";
  textio::write_file(path, bench::hull_tsv(hull));
  std::printf("hull %s/%s written to %s\n", cfg.hull.series.c_str(),
              cfg.hull.optimizer.c_str(), path.c_str());
  return kExitOk;
}

int cmd_check_forces(const RunConfig& cfg, int trials) {
  const tasks::TaskSpec task = tasks::builtin_task(cfg.eval.task);
  const auto main_result = check_forces_on(task, task.potential, true, trials,
                                           cfg.seed, 1e-5, 1e-6, cfg.workers);
  const potentials::PotentialSpec pre = potentials::SoftSphere{1.0, 2.0, 1.0};
  const auto pre_result = check_forces_on(task, pre, false, trials, cfg.seed,
                                          1e-5, 1e-6, cfg.workers);
  auto print = [&](const char* label, const ForceCheckResult& r) {
    if (r.pass) {
      std::printf("%s: PASS (worst rel %.3g over %d trials)\n", label, r.worst_rel,
                  r.trials);
    } else {
      std::printf("%s: FAIL worst rel %.3g at trial %d atom %d axis %d\n", label,
                  r.worst_rel, r.worst_trial, r.worst_atom, r.worst_axis);
    }
  };
  print("task potential", main_result);
  print("soft-sphere initializer", pre_result);
  return main_result.pass && pre_result.pass ? kExitOk : kExitNumerical;
}

}  // namespace atomopt::cli
