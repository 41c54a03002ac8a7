#include "atomopt/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "atomopt/parallel.hpp"
#include "atomopt/potentials.hpp"
#include "atomopt/textio.hpp"

namespace atomopt::bench {

using nlohmann::ordered_json;

std::string optimizer_name(const OptimizerSpec& opt) {
  if (std::holds_alternative<optimizers::GdParams>(opt)) return "gd";
  if (std::holds_alternative<optimizers::AdamParams>(opt)) return "adam";
  if (std::holds_alternative<optimizers::FireParams>(opt)) return "fire";
  if (std::holds_alternative<BhSpec>(opt)) return "bh";
  return std::get<LearnedSpec>(opt).label;
}

Configuration polish(const Configuration& config, const tasks::TaskSpec& task,
                     bool* flagged) {
  const auto traj = optimizers::run(task, optimizers::GdParams{1e-3}, config,
                                    1000, 1000);
  if (flagged) *flagged = traj.diverged;
  if (traj.diverged) return config;
  return traj.final_config;
}

int gm_hit_count(const std::vector<double>& finals, double gm_reference,
                 double tol) {
  int hits = 0;
  for (double e : finals) {
    if (std::isfinite(e) && std::abs(e - gm_reference) <= tol) ++hits;
  }
  return hits;
}

std::vector<HistBin> histogram(const std::vector<double>& finals, double anchor,
                               double width) {
  std::vector<HistBin> bins;
  if (finals.empty()) return bins;
  long lo_idx = 0, hi_idx = 0;
  bool first = true;
  auto index_of = [&](double e) {
    return static_cast<long>(std::floor((e - anchor) / width));
  };
  for (double e : finals) {
    if (!std::isfinite(e)) continue;
    const long idx = index_of(e);
    if (first || idx < lo_idx) lo_idx = first ? idx : std::min(lo_idx, idx);
    if (first || idx > hi_idx) hi_idx = first ? idx : std::max(hi_idx, idx);
    first = false;
  }
  if (first) return bins;
  bins.resize(static_cast<std::size_t>(hi_idx - lo_idx + 1));
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b] = {anchor + (lo_idx + static_cast<long>(b)) * width,
               anchor + (lo_idx + static_cast<long>(b) + 1) * width, 0};
  }
  for (double e : finals) {
    if (!std::isfinite(e)) continue;
    bins[static_cast<std::size_t>(index_of(e) - lo_idx)].count += 1;
  }
  return bins;
}

namespace {

optimizers::Trajectory run_one(const tasks::TaskSpec& task,
                               const OptimizerSpec& opt,
                               const Configuration& init, RngStream bh_rng) {
  const long steps = task.inner_steps;
  if (const auto* bh = std::get_if<BhSpec>(&opt)) {
    if (steps % bh->n_basins != 0) {
      throw std::invalid_argument(
          "evaluate: inner steps not divisible by basin count");
    }
    return optimizers::basin_hopping(task, init, bh->n_basins,
                                     steps / bh->n_basins, bh->step_scale,
                                     bh_rng, bh->adam_lr);
  }
  if (const auto* ls = std::get_if<LearnedSpec>(&opt)) {
    return learned::run_learned(task, ls->params, ls->features, init, steps,
                                steps);
  }
  optimizers::LocalOptimizer local = optimizers::GdParams{};
  if (const auto* gd = std::get_if<optimizers::GdParams>(&opt)) local = *gd;
  if (const auto* ad = std::get_if<optimizers::AdamParams>(&opt)) local = *ad;
  if (const auto* fp = std::get_if<optimizers::FireParams>(&opt)) local = *fp;
  return optimizers::run(task, local, init, steps, steps);
}

}  // namespace

EvalReport evaluate(const tasks::TaskSpec& task, const OptimizerSpec& opt,
                    const EvalOptions& options) {
  if (options.n_inits < 1) throw std::invalid_argument("evaluate: n_inits >= 1");
  EvalReport report;
  report.task = task.name;
  report.optimizer = optimizer_name(opt);
  report.seed = options.seed;
  report.inner_steps = task.inner_steps;
  report.n_inits = options.n_inits;
  report.gm_reference = task.gm_reference;
  report.finals.assign(static_cast<std::size_t>(options.n_inits), 0.0);

  const RngStream root = RngStream::root(options.seed);
  std::vector<char> diverged_flags(report.finals.size(), 0);
  parallel_for(report.finals.size(), options.workers, [&](std::size_t i) {
    RngStream stream = root.fork(i);
    const Configuration init = tasks::harmonic_init(task, stream.fork(0));
    auto traj = run_one(task, opt, init, stream.fork(1));
    bool polish_diverged = false;
    Configuration end = traj.final_config;
    double final_energy = traj.final_energy;
    if (options.apply_polish && !traj.diverged) {
      end = polish(end, task, &polish_diverged);
      if (!polish_diverged) {
        final_energy = potentials::energy(end, task.potential);
      }
    }
    report.finals[i] = final_energy;
    diverged_flags[i] = (traj.diverged || polish_diverged) ? 1 : 0;
  });

  double sum = 0.0;
  double min_e = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < report.finals.size(); ++i) {
    sum += report.finals[i];
    min_e = std::min(min_e, report.finals[i]);
    report.diverged += diverged_flags[i];
  }
  report.min_energy = min_e;
  report.mean_energy = sum / static_cast<double>(report.finals.size());
  if (report.gm_reference) {
    report.gm_hits = gm_hit_count(report.finals, *report.gm_reference, options.gm_tol);
  }
  const double anchor = report.gm_reference ? *report.gm_reference
                                            : std::floor(report.min_energy);
  report.histogram = histogram(report.finals, anchor, options.hist_width);
  return report;
}

double formation_energy(double e, int m, int n, double e_pure_a,
                        double e_pure_b) {
  if (n <= 0 || m < 0 || m > n) {
    throw std::invalid_argument("formation_energy: need 0 <= m <= n");
  }
  const double frac = static_cast<double>(m) / n;
  return e - (1.0 - frac) * e_pure_a - frac * e_pure_b;
}

std::vector<HullPoint> lower_convex_hull(std::vector<HullPoint> points) {
  if (points.size() < 2) {
    throw std::invalid_argument("lower_convex_hull: need at least two points");
  }
  std::sort(points.begin(), points.end(), [](const HullPoint& a, const HullPoint& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  if (points.front().x != 0.0 || points.back().x != 1.0) {
    throw std::invalid_argument("lower_convex_hull: endpoints x=0 and x=1 required");
  }
  // Monotone chain, lower envelope only. The strict turn test drops interior
  // collinear points. Duplicate x keeps only the lowest y.
  std::vector<HullPoint> dedup;
  for (const auto& p : points) {
    if (!dedup.empty() && dedup.back().x == p.x) continue;  // sorted: first is lowest
    dedup.push_back(p);
  }
  std::vector<HullPoint> hull;
  for (const auto& p : dedup) {
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull[hull.size() - 1];
      const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
      if (cross <= 0.0) {
        hull.pop_back();  // b is above or on segment a-p
      } else {
        break;
      }
    }
    hull.push_back(p);
  }
  return hull;
}

HullReport hull_report(const std::string& series, const std::string& optimizer,
                       std::uint64_t seed,
                       const std::vector<std::tuple<std::string, int, int, double>>&
                           compositions) {
  HullReport report;
  report.series = series;
  report.optimizer = optimizer;
  report.seed = seed;
  std::optional<double> pure_a, pure_b;
  for (const auto& [name, m, n, e] : compositions) {
    if (m == 0) pure_a = e;
    if (m == n) pure_b = e;
  }
  if (!pure_a || !pure_b) {
    throw std::invalid_argument("hull_report: pure endpoints m=0 and m=n required");
  }
  report.e_pure_a = *pure_a;
  report.e_pure_b = *pure_b;
  std::vector<HullPoint> points;
  for (const auto& [name, m, n, e] : compositions) {
    HullRow row;
    row.task = name;
    row.m = m;
    row.n = n;
    row.raw_energy = e;
    row.formation = formation_energy(e, m, n, *pure_a, *pure_b);
    report.rows.push_back(row);
    points.push_back({static_cast<double>(m) / n, row.formation});
  }
  const auto hull = lower_convex_hull(points);
  for (auto& row : report.rows) {
    const double x = static_cast<double>(row.m) / row.n;
    for (const auto& hp : hull) {
      if (hp.x == x && hp.y == row.formation) {
        row.on_hull = true;
        break;
      }
    }
  }
  return report;
}

BenchmarkTable benchmark_table(const std::vector<tasks::TaskSpec>& task_list,
                               const std::vector<BenchmarkEntry>& optimizers,
                               int n_inits, std::uint64_t seed, int workers) {
  BenchmarkTable table;
  if (task_list.empty() || optimizers.empty()) {
    throw std::invalid_argument("benchmark_table: tasks and optimizers required");
  }
  std::optional<long> budget;
  for (const auto& entry : optimizers) {
    if (!entry.steps_override) continue;
    if (budget && *budget != *entry.steps_override) {
      throw std::invalid_argument("benchmark_table: step budgets differ");
    }
    budget = *entry.steps_override;
  }
  for (const auto& task : task_list) {
    tasks::TaskSpec t = task;
    if (budget) t.inner_steps = *budget;
    table.inner_steps = t.inner_steps;
    for (const auto& entry : optimizers) {
      EvalOptions options;
      options.n_inits = n_inits;
      options.seed = seed;
      options.workers = workers;
      const EvalReport rep = evaluate(t, entry.opt, options);
      table.rows.push_back({t.name, entry.name, rep.min_energy, rep.mean_energy,
                            rep.gm_hits});
    }
  }
  return table;
}

std::string report_summary_json(const EvalReport& report) {
  ordered_json j;
  j["schema"] = "atomopt.eval.v1";
  j["task"] = report.task;
  j["optimizer"] = report.optimizer;
  j["seed"] = report.seed;
  j["inner_steps"] = report.inner_steps;
  j["n_inits"] = report.n_inits;
  j["min_energy"] = report.min_energy;
  j["mean_energy"] = report.mean_energy;
  if (report.gm_reference) {
    j["gm_reference"] = *report.gm_reference;
    j["gm_hits"] = report.gm_hits;
  }
  j["diverged"] = report.diverged;
  return j.dump(2) + "\n";
}

std::string report_finals_tsv(const EvalReport& report) {
  textio::TsvWriter w({"init", "energy"});
  for (std::size_t i = 0; i < report.finals.size(); ++i) {
    w.row({std::to_string(i), textio::fmt_double(report.finals[i])});
  }
  return w.str();
}

std::string report_hist_tsv(const EvalReport& report) {
  textio::TsvWriter w({"bin_lo", "bin_hi", "count"});
  for (const auto& bin : report.histogram) {
    w.row({textio::fmt_double(bin.lo), textio::fmt_double(bin.hi),
           std::to_string(bin.count)});
  }
  return w.str();
}

std::string trajectory_tsv(const optimizers::Trajectory& traj) {
  textio::TsvWriter w({"step", "energy"});
  for (const auto& s : traj.samples) {
    w.row({std::to_string(s.step), textio::fmt_double(s.energy)});
  }
  return w.str();
}

std::string hull_tsv(const HullReport& report) {
  textio::TsvWriter w({"task", "m", "n", "fraction", "raw_energy",
                       "formation_energy", "on_hull"});
  for (const auto& row : report.rows) {
    w.row({row.task, std::to_string(row.m), std::to_string(row.n),
           textio::fmt_double(static_cast<double>(row.m) / row.n),
           textio::fmt_double(row.raw_energy), textio::fmt_double(row.formation),
           row.on_hull ? "1" : "0"});
  }
  return w.str();
}

std::string benchmark_tsv(const BenchmarkTable& table) {
  textio::TsvWriter w({"task", "optimizer", "min", "mean", "gm_hits"});
  for (const auto& row : table.rows) {
    w.row({row.task, row.optimizer, textio::fmt_double(row.min_energy),
           textio::fmt_double(row.mean_energy), std::to_string(row.gm_hits)});
  }
  return w.str();
}

void export_report(const std::string& dir, const EvalReport& report) {
  textio::ensure_dir(dir);
  const std::string base =
      dir + "/eval_" + report.task + "_" + report.optimizer + "_s" +
      std::to_string(report.seed);
  textio::write_file(base + ".json", report_summary_json(report));
  textio::write_file(base + "_finals.tsv", report_finals_tsv(report));
  textio::write_file(base + "_hist.tsv", report_hist_tsv(report));
}

}  // namespace atomopt::bench
