#include "atomopt/metatrain.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "atomopt/jsonfmt.hpp"
#include "atomopt/parallel.hpp"
#include "atomopt/textio.hpp"

namespace atomopt::meta {

using nlohmann::ordered_json;

Strategy strategy_from_string(const std::string& name) {
  if (name == "es") return Strategy::es;
  if (name == "esmc") return Strategy::esmc;
  if (name == "ga") return Strategy::ga;
  throw std::invalid_argument("unknown strategy: " + name);
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::es: return "es";
    case Strategy::esmc: return "esmc";
    case Strategy::ga: return "ga";
  }
  return "?";
}

Batch sample_batch(const std::vector<tasks::TaskSpec>& task_list, int target,
                   RngStream rng) {
  const int m = static_cast<int>(task_list.size());
  if (m < 1) throw std::invalid_argument("sample_batch: no tasks");
  if (m > target) throw std::invalid_argument("sample_batch: more tasks than target");
  const int copies = target / m;
  Batch batch;
  batch.reserve(static_cast<std::size_t>(copies * m));
  std::uint64_t instance = 0;
  for (const auto& task : task_list) {
    for (int c = 0; c < copies; ++c) {
      batch.push_back({&task, tasks::harmonic_init(task, rng.fork(instance))});
      ++instance;
    }
  }
  return batch;
}

namespace {

struct UnrollStats {
  std::atomic<long> unrolls{0};
  std::atomic<long> diverged{0};

  void flush(EvalCounters* counters) const {
    if (!counters) return;
    counters->unrolls += unrolls.load();
    counters->diverged += diverged.load();
  }
};

double unroll_loss(const learned::LearnedOptParams& params,
                   const learned::FeatureConfig& fc, const TaskInstance& inst,
                   UnrollStats* stats) {
  const auto result = learned::unroll(*inst.task, params, fc, inst.init,
                                      inst.task->inner_steps, 0);
  if (stats) {
    stats->unrolls.fetch_add(1);
    if (result.trajectory.diverged) stats->diverged.fetch_add(1);
  }
  return result.normalized_final;
}

// Mean loss of `params` over the strided sub-batch {i : i % n_pairs == k}.
double sub_batch_loss(const learned::LearnedOptParams& params,
                      const learned::FeatureConfig& fc, const Batch& batch,
                      int n_pairs, int k, UnrollStats* stats) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = static_cast<std::size_t>(k); i < batch.size();
       i += static_cast<std::size_t>(n_pairs)) {
    sum += unroll_loss(params, fc, batch[i], stats);
    ++count;
  }
  return count > 0 ? sum / count : 0.0;
}

}  // namespace

double meta_loss(const learned::LearnedOptParams& params,
                 const learned::FeatureConfig& fc, const Batch& batch,
                 int workers, EvalCounters* counters) {
  if (batch.empty()) throw std::invalid_argument("meta_loss: empty batch");
  std::vector<double> losses(batch.size(), 0.0);
  UnrollStats stats;
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    losses[i] = unroll_loss(params, fc, batch[i], &stats);
  });
  stats.flush(counters);
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(losses.size());
}

Eigen::VectorXd es_gradient(const learned::LearnedOptParams& params,
                            const learned::FeatureConfig& fc, const Batch& batch,
                            double sigma, int n_pairs, RngStream rng,
                            EvalCounters* counters, int workers) {
  UnrollStats stats;
  const Eigen::VectorXd theta = learned::to_vector(params);
  auto loss = [&](const Eigen::VectorXd& th, int k) {
    return sub_batch_loss(learned::from_vector(fc, th), fc, batch, n_pairs, k,
                          &stats);
  };
  const Eigen::VectorXd grad =
      es_gradient_generic(loss, theta, sigma, n_pairs, rng, counters, workers);
  stats.flush(counters);
  return grad;
}

Eigen::VectorXd esmc_gradient(const learned::LearnedOptParams& params,
                              const learned::FeatureConfig& fc, const Batch& batch,
                              double sigma, int n_pairs, RngStream rng,
                              EvalCounters* counters, int workers,
                              double* baseline_mean) {
  UnrollStats stats;
  const Eigen::VectorXd theta = learned::to_vector(params);
  auto loss = [&](const Eigen::VectorXd& th, int k) {
    return sub_batch_loss(learned::from_vector(fc, th), fc, batch, n_pairs, k,
                          &stats);
  };
  const Eigen::VectorXd grad = esmc_gradient_generic(
      loss, theta, sigma, n_pairs, rng, counters, workers, {}, baseline_mean);
  stats.flush(counters);
  return grad;
}

GaOutcome ga_generation(const learned::LearnedOptParams& params,
                        const learned::FeatureConfig& fc, int population_size,
                        double sigma, const Batch& batch, RngStream rng,
                        EvalCounters* counters, int workers) {
  if (population_size < 1) {
    throw std::invalid_argument("ga_generation: population_size must be >= 1");
  }
  if (batch.empty()) throw std::invalid_argument("ga_generation: empty batch");

  const Eigen::VectorXd theta = learned::to_vector(params);
  std::vector<Eigen::VectorXd> members(static_cast<std::size_t>(population_size));
  for (int i = 0; i < population_size; ++i) {
    RngStream s = rng.fork(static_cast<std::uint64_t>(i));
    Eigen::VectorXd cand = theta;
    for (Eigen::Index d = 0; d < cand.size(); ++d) cand[d] += sigma * s.normal();
    members[static_cast<std::size_t>(i)] = std::move(cand);
  }

  const std::size_t b = batch.size();
  // population members first, incumbent last; one work unit per unroll.
  std::vector<double> losses((static_cast<std::size_t>(population_size) + 1) * b, 0.0);
  UnrollStats stats;
  std::vector<learned::LearnedOptParams> decoded(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    decoded[i] = learned::from_vector(fc, members[i]);
  }
  parallel_for(losses.size(), workers, [&](std::size_t u) {
    const std::size_t member = u / b;
    const std::size_t inst = u % b;
    const auto& p = member < decoded.size() ? decoded[member] : params;
    losses[u] = unroll_loss(p, fc, batch[inst], &stats);
  });
  stats.flush(counters);
  if (counters) {
    counters->grad_evals += population_size;
    counters->baseline_evals += 1;
  }

  auto mean_of = [&](std::size_t member) {
    double sum = 0.0;
    for (std::size_t i = 0; i < b; ++i) sum += losses[member * b + i];
    return sum / static_cast<double>(b);
  };

  GaOutcome out;
  out.incumbent_loss = mean_of(static_cast<std::size_t>(population_size));
  double best = std::numeric_limits<double>::infinity();
  int best_idx = -1;
  for (int i = 0; i < population_size; ++i) {
    const double l = mean_of(static_cast<std::size_t>(i));
    if (l < best) {
      best = l;
      best_idx = i;
    }
  }
  if (best_idx >= 0 && best < out.incumbent_loss) {
    out.params = std::move(decoded[static_cast<std::size_t>(best_idx)]);
    out.accepted_loss = best;
    out.accepted_index = best_idx;
  } else {
    out.params = params;
    out.accepted_loss = out.incumbent_loss;
    out.accepted_index = -1;
  }
  return out;
}

std::string TrainLog::to_tsv() const {
  textio::TsvWriter w({"update", "meta_loss", "best_meta_loss", "outer_lr",
                       "wall_ms", "diverged_unrolls"});
  for (const auto& r : rows) {
    w.row({std::to_string(r.update), textio::fmt_double(r.meta_loss),
           textio::fmt_double(r.best_meta_loss), textio::fmt_double(r.outer_lr),
           textio::fmt_double(r.wall_ms), std::to_string(r.diverged_unrolls)});
  }
  return w.str();
}

namespace {

constexpr std::uint64_t kUpdateForkBase = 0x11000;
constexpr std::uint64_t kInitParamsFork = 0xF00D;

struct TrainerState {
  Eigen::VectorXd theta;
  Eigen::VectorXd best_theta;
  double best_loss = std::numeric_limits<double>::infinity();
  Eigen::VectorXd adam_m, adam_v;
  long adam_t = 0;
  int next_update = 0;
};

void save_trainer_state(const std::string& path, const MetaConfig& cfg,
                        const TrainerState& st) {
  ordered_json j;
  j["version"] = 1;
  j["strategy"] = strategy_name(cfg.strategy);
  j["seed"] = cfg.seed;
  j["next_update"] = st.next_update;
  j["best_loss"] = st.best_loss;
  auto dump = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  j["theta"] = dump(st.theta);
  j["best_theta"] = dump(st.best_theta);
  j["adam_m"] = dump(st.adam_m);
  j["adam_v"] = dump(st.adam_v);
  j["adam_t"] = st.adam_t;
  textio::write_file(path, j.dump(2) + "\n");
}

TrainerState load_trainer_state(const std::string& path) {
  const auto j = ordered_json::parse(textio::read_file(path));
  TrainerState st;
  auto vec = [&](const char* key) {
    const auto v = j.at(key).get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                             static_cast<Eigen::Index>(v.size()))
        .eval();
  };
  st.theta = vec("theta");
  st.best_theta = vec("best_theta");
  st.adam_m = vec("adam_m");
  st.adam_v = vec("adam_v");
  st.adam_t = j.at("adam_t").get<long>();
  st.best_loss = j.at("best_loss").get<double>();
  st.next_update = j.at("next_update").get<int>();
  return st;
}

}  // namespace

TrainOutputs train(const MetaConfig& cfg, const std::vector<double>& normalizers,
                   const std::string& out_dir, const std::string& resume_from) {
  if (cfg.task_names.empty()) throw std::invalid_argument("train: no tasks");
  if (normalizers.size() != cfg.task_names.size()) {
    throw std::invalid_argument("train: one normalizer per task required");
  }
  if ((cfg.strategy == Strategy::es || cfg.strategy == Strategy::esmc) &&
      cfg.population % 2 != 0) {
    throw std::invalid_argument("train: es/esmc population must be even");
  }

  std::vector<tasks::TaskSpec> task_list;
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < cfg.task_names.size(); ++i) {
    tasks::TaskSpec t = tasks::builtin_task(cfg.task_names[i]);
    t.inner_steps = cfg.inner_steps;
    if (normalizers[i] > 0.0) {
      t.normalizer = normalizers[i];
    } else {
      missing.push_back(t.name);
    }
    task_list.push_back(std::move(t));
  }
  if (!missing.empty()) {
    std::string msg = "train: tasks lack normalizers:";
    for (const auto& name : missing) msg += " " + name;
    throw std::invalid_argument(msg);
  }

  const RngStream root = RngStream::root(cfg.seed);
  const learned::FeatureConfig& fc = cfg.features;

  TrainerState st;
  if (!resume_from.empty()) {
    st = load_trainer_state(resume_from);
  } else {
    st.theta = learned::to_vector(
        learned::init_params(fc, root.fork(kInitParamsFork)));
    st.best_theta = st.theta;
  }

  OuterAdam outer(st.theta.size(), cfg.outer_lr0, cfg.lr_decay, cfg.decay_every);
  if (!resume_from.empty() && st.adam_m.size() == st.theta.size()) {
    outer.restore(st.adam_m, st.adam_v, st.adam_t);
  }

  TrainOutputs out;
  const int n_pairs = cfg.population / 2;
  const std::string ckpt_dir = out_dir.empty() ? "" : out_dir + "/checkpoints";
  const std::string log_dir = out_dir.empty() ? "" : out_dir + "/logs";
  if (!out_dir.empty()) {
    textio::ensure_dir(ckpt_dir);
    textio::ensure_dir(log_dir);
  }

  auto write_ckpt = [&](const std::string& name, const Eigen::VectorXd& theta,
                        long update) {
    if (out_dir.empty()) return;
    learned::Checkpoint ckpt;
    ckpt.params = learned::from_vector(fc, theta);
    ckpt.features = fc;
    ckpt.seed = cfg.seed;
    ckpt.update_index = update;
    learned::save_checkpoint(ckpt_dir + "/" + name, ckpt);
  };

  auto consider_best = [&](const Eigen::VectorXd& theta, double loss) {
    if (loss < st.best_loss) {
      st.best_loss = loss;
      st.best_theta = theta;
    }
  };

  for (int u = st.next_update; u < cfg.total_updates; ++u) {
    const auto t_start = std::chrono::steady_clock::now();
    RngStream upd = root.fork(kUpdateForkBase + static_cast<std::uint64_t>(u));
    EvalCounters step_counters;
    double current_loss = 0.0;

    if (cfg.strategy == Strategy::ga) {
      const Batch batch = sample_batch(task_list, cfg.ga_batch, upd.fork(0));
      learned::LearnedOptParams params = learned::from_vector(fc, st.theta);
      GaOutcome ga = ga_generation(params, fc, cfg.population, cfg.sigma, batch,
                                   upd.fork(1), &step_counters, cfg.workers);
      current_loss = ga.incumbent_loss;
      consider_best(st.theta, ga.incumbent_loss);
      st.theta = learned::to_vector(ga.params);
      consider_best(st.theta, ga.accepted_loss);
    } else {
      const Batch batch = sample_batch(task_list, cfg.batch_target, upd.fork(0));
      learned::LearnedOptParams params = learned::from_vector(fc, st.theta);
      Eigen::VectorXd grad;
      if (cfg.strategy == Strategy::esmc) {
        grad = esmc_gradient(params, fc, batch, cfg.sigma, n_pairs, upd.fork(1),
                             &step_counters, cfg.workers, &current_loss);
      } else {
        grad = es_gradient(params, fc, batch, cfg.sigma, n_pairs, upd.fork(1),
                           &step_counters, cfg.workers);
        EvalCounters aux;
        current_loss = meta_loss(params, fc, batch, cfg.workers, &aux);
        step_counters.aux_evals += 1;
        step_counters.unrolls += aux.unrolls;
        step_counters.diverged += aux.diverged;
      }
      consider_best(st.theta, current_loss);
      if (grad.allFinite()) {
        outer.step(st.theta, grad);
      }
    }

    const auto t_end = std::chrono::steady_clock::now();
    TrainLogRow row;
    row.update = u;
    row.meta_loss = current_loss;
    row.best_meta_loss = st.best_loss;
    row.outer_lr = cfg.strategy == Strategy::ga ? 0.0 : outer.lr();
    row.wall_ms = std::chrono::duration<double, std::milli>(t_end - t_start).count();
    row.diverged_unrolls = static_cast<int>(step_counters.diverged);
    out.log.rows.push_back(row);

    out.counters.grad_evals += step_counters.grad_evals;
    out.counters.baseline_evals += step_counters.baseline_evals;
    out.counters.aux_evals += step_counters.aux_evals;
    out.counters.unrolls += step_counters.unrolls;
    out.counters.diverged += step_counters.diverged;

    st.next_update = u + 1;
    if (!out_dir.empty() && cfg.checkpoint_every > 0 &&
        (u + 1) % cfg.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "ckpt_%06d.json", u + 1);
      write_ckpt(name, st.theta, u + 1);
      st.adam_m = outer.m();
      st.adam_v = outer.v();
      st.adam_t = outer.updates_done();
      save_trainer_state(ckpt_dir + "/trainer_state.json", cfg, st);
    }
  }

  write_ckpt("latest.json", st.theta, cfg.total_updates);
  write_ckpt("best.json", st.best_theta, cfg.total_updates);
  if (!out_dir.empty()) {
    st.adam_m = outer.m();
    st.adam_v = outer.v();
    st.adam_t = outer.updates_done();
    save_trainer_state(ckpt_dir + "/trainer_state.json", cfg, st);
    const std::string log_path = log_dir + "/train_log.tsv";
    if (!resume_from.empty() && textio::file_exists(log_path)) {
      // Continue the existing log; rows only, no second header.
      const std::string tsv = out.log.to_tsv();
      const auto first_newline = tsv.find('\n');
      textio::write_file(log_path, textio::read_file(log_path) +
                                       tsv.substr(first_newline + 1));
    } else {
      textio::write_file(log_path, out.log.to_tsv());
    }
  }

  out.final_params = learned::from_vector(fc, st.theta);
  out.best_params = learned::from_vector(fc, st.best_theta);
  out.best_loss = st.best_loss;
  return out;
}

}  // namespace atomopt::meta
