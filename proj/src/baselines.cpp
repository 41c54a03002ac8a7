#include "atomopt/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "atomopt/esgrad.hpp"
#include "atomopt/parallel.hpp"
#include "atomopt/potentials.hpp"
#include "atomopt/textio.hpp"

namespace atomopt::optimizers {

using nlohmann::ordered_json;

AdamState AdamState::like(const Configuration& config) {
  AdamState st;
  st.m = Positions::Zero(config.n_atoms(), 3);
  st.v = Positions::Zero(config.n_atoms(), 3);
  st.t = 0;
  return st;
}

FireParams FireParams::from_lr(double lr) {
  FireParams p;
  p.dt0 = lr;
  p.dt_max = 10.0 * lr;
  return p;
}

FireState FireState::like(const Configuration& config, const FireParams& params) {
  FireState st;
  st.velocity = Positions::Zero(config.n_atoms(), 3);
  st.dt = params.dt0;
  st.alpha = params.alpha_start;
  st.steps_uphill_free = 0;
  return st;
}

void gd_step_inplace(Positions& x, const Positions& forces, double lr) {
  x += lr * forces;
}

void adam_step_inplace(Positions& x, const Positions& grads, AdamState& state,
                       const AdamParams& params) {
  state.t += 1;
  state.m = params.beta1 * state.m + (1.0 - params.beta1) * grads;
  state.v.array() =
      params.beta2 * state.v.array() + (1.0 - params.beta2) * grads.array().square();
  const double bc1 = 1.0 - std::pow(params.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(params.beta2, static_cast<double>(state.t));
  x.array() -= params.lr * (state.m.array() / bc1) /
               ((state.v.array() / bc2).sqrt() + params.eps);
}

void fire_step_inplace(Positions& x, const Positions& forces, FireState& state,
                       const FireParams& params) {
  state.velocity += state.dt * forces;  // semi-implicit Euler, unit masses
  const double power = (forces.array() * state.velocity.array()).sum();
  if (power > 0.0) {
    const double vnorm = state.velocity.norm();
    const double fnorm = forces.norm();
    if (fnorm > 0.0) {
      state.velocity = (1.0 - state.alpha) * state.velocity +
                       state.alpha * vnorm / fnorm * forces;
    }
    state.steps_uphill_free += 1;
    if (state.steps_uphill_free > params.n_min) {
      state.dt = std::min(state.dt * params.f_inc, params.dt_max);
      state.alpha *= params.f_alpha;
    }
  } else {
    state.velocity.setZero();
    state.dt *= params.f_dec;
    state.alpha = params.alpha_start;
    state.steps_uphill_free = 0;
  }
  x += state.dt * state.velocity;
}

Configuration gd_step(const Configuration& config, const Positions& forces,
                      double lr) {
  if (lr < 0.0) throw std::invalid_argument("gd_step: lr must be >= 0");
  Configuration out = config;
  gd_step_inplace(out.positions, forces, lr);
  return out;
}

std::pair<Configuration, AdamState> adam_step(const Configuration& config,
                                              const Positions& grads,
                                              AdamState state,
                                              const AdamParams& params) {
  if (state.m.rows() != config.n_atoms()) {
    throw std::invalid_argument("adam_step: state/config shape mismatch");
  }
  Configuration out = config;
  adam_step_inplace(out.positions, grads, state, params);
  return {std::move(out), std::move(state)};
}

std::pair<Configuration, FireState> fire_step(const Configuration& config,
                                              const Positions& forces,
                                              FireState state,
                                              const FireParams& params) {
  Configuration out = config;
  fire_step_inplace(out.positions, forces, state, params);
  return {std::move(out), std::move(state)};
}

namespace {

struct Stepper {
  const LocalOptimizer& opt;
  AdamState adam;
  FireState fire;

  Stepper(const LocalOptimizer& o, const Configuration& config) : opt(o) {
    if (std::holds_alternative<AdamParams>(o)) {
      adam = AdamState::like(config);
    } else if (std::holds_alternative<FireParams>(o)) {
      fire = FireState::like(config, std::get<FireParams>(o));
    }
  }

  // GD and FIRE consume forces; Adam consumes gradients (their negation).
  void apply(Positions& x, const Positions& forces) {
    if (const auto* gd = std::get_if<GdParams>(&opt)) {
      gd_step_inplace(x, forces, gd->lr);
    } else if (const auto* ad = std::get_if<AdamParams>(&opt)) {
      adam_step_inplace(x, -forces, adam, *ad);
    } else {
      fire_step_inplace(x, forces, fire, std::get<FireParams>(opt));
    }
  }
};

}  // namespace

Trajectory run(const tasks::TaskSpec& task, const LocalOptimizer& opt,
               const Configuration& init, long steps, long stride) {
  if (steps < 1) throw std::invalid_argument("run: steps must be >= 1");
  if (stride < 1) stride = steps;

  Trajectory traj;
  Configuration cur = init;
  const double e0 = potentials::energy(cur, task.potential);
  traj.samples.push_back({0, e0});
  if (potentials::diverged(e0)) {
    traj.final_config = cur;
    traj.final_energy = e0;
    traj.diverged = true;
    return traj;
  }

  // Divergence fallbacks, cheapest first: current state, previous step,
  // last sampled state, initial state.
  Positions prev = cur.positions;
  Positions last_sampled = cur.positions;
  double last_sampled_energy = e0;

  Stepper stepper(opt, cur);
  Positions f;
  long done = 0;
  for (long t = 1; t <= steps; ++t) {
    potentials::forces_into(cur, task.potential, f);
    if (!f.allFinite()) {
      traj.diverged = true;
      break;
    }
    prev = cur.positions;
    stepper.apply(cur.positions, f);
    if (!cur.positions.allFinite()) {
      traj.diverged = true;
      cur.positions = prev;
      break;
    }
    done = t;
    if (t % stride == 0 || t == steps) {
      const double e = potentials::energy(cur, task.potential);
      if (potentials::diverged(e)) {
        traj.diverged = true;
        cur.positions = prev;
        break;
      }
      traj.samples.push_back({t, e});
      last_sampled = cur.positions;
      last_sampled_energy = e;
    }
  }
  traj.steps = done;

  if (!traj.diverged) {
    traj.final_config = std::move(cur);
    traj.final_energy = traj.samples.back().energy;
    return traj;
  }
  // Roll back to the most recent finite-energy state.
  for (const Positions* cand : {&cur.positions, &prev, &last_sampled}) {
    Configuration c = init;
    c.positions = *cand;
    const double e = potentials::energy(c, task.potential);
    if (!potentials::diverged(e)) {
      traj.final_config = std::move(c);
      traj.final_energy = e;
      return traj;
    }
  }
  traj.final_config = init;
  traj.final_energy = last_sampled_energy;
  (void)last_sampled_energy;
  return traj;
}

Trajectory basin_hopping(const tasks::TaskSpec& task, const Configuration& init,
                         int n_basins, long steps_per_basin, double step_scale,
                         RngStream rng, double adam_lr) {
  if (n_basins < 1) throw std::invalid_argument("basin_hopping: n_basins >= 1");
  const AdamParams descent{adam_lr, 0.9, 0.999, 1e-8};

  Trajectory out;
  Trajectory first = run(task, descent, init, steps_per_basin, steps_per_basin);
  Configuration incumbent = first.final_config;
  double incumbent_energy = first.final_energy;
  out.diverged = first.diverged;
  out.samples.push_back({steps_per_basin, incumbent_energy});

  for (int b = 1; b < n_basins; ++b) {
    RngStream hop = rng.fork(static_cast<std::uint64_t>(b));
    Configuration proposal = incumbent;
    for (Eigen::Index i = 0; i < proposal.n_atoms(); ++i) {
      for (int k = 0; k < 3; ++k) {
        proposal.positions(i, k) += step_scale * hop.normal();
      }
    }
    Trajectory descent_traj =
        run(task, descent, proposal, steps_per_basin, steps_per_basin);
    if (!descent_traj.diverged && descent_traj.final_energy < incumbent_energy) {
      incumbent = std::move(descent_traj.final_config);
      incumbent_energy = descent_traj.final_energy;
    }
    out.samples.push_back({(b + 1) * steps_per_basin, incumbent_energy});
  }
  out.final_config = std::move(incumbent);
  out.final_energy = incumbent_energy;
  out.steps = static_cast<long>(n_basins) * steps_per_basin;
  return out;
}

std::string family_name(TuneFamily family) {
  switch (family) {
    case TuneFamily::adam: return "adam";
    case TuneFamily::fire: return "fire";
    case TuneFamily::bh: return "bh";
  }
  return "?";
}

namespace {

constexpr std::uint64_t kTuneInitFork = 100;

std::vector<Configuration> shared_inits(const tasks::TaskSpec& task,
                                        RngStream rng, int k) {
  std::vector<Configuration> inits;
  inits.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    inits.push_back(tasks::harmonic_init(task, rng.fork(kTuneInitFork + i)));
  }
  return inits;
}

double mean_final_energy(const tasks::TaskSpec& task, TuneFamily family,
                         const LocalOptimizer& opt, double bh_scale,
                         const std::vector<Configuration>& inits, RngStream rng,
                         int workers) {
  std::vector<double> finals(inits.size(), 0.0);
  parallel_for(inits.size(), workers, [&](std::size_t i) {
    Trajectory traj;
    if (family == TuneFamily::bh) {
      const long per_basin = std::max<long>(1, task.inner_steps / 10);
      traj = basin_hopping(task, inits[i], 10, per_basin, bh_scale,
                           rng.fork(7000 + i));
    } else {
      traj = run(task, opt, inits[i], task.inner_steps, task.inner_steps);
    }
    finals[i] = traj.final_energy;
  });
  double sum = 0.0;
  for (double e : finals) sum += e;
  return sum / static_cast<double>(finals.size());
}

}  // namespace

GridResult tune_grid(const tasks::TaskSpec& task, TuneFamily family,
                     RngStream rng, int k_inits, int workers) {
  const std::vector<double> grid =
      family == TuneFamily::bh ? std::vector<double>{0.2, 0.4, 0.6, 0.8}
                               : std::vector<double>{0.001, 0.005, 0.01};
  const auto inits = shared_inits(task, rng, k_inits);

  GridResult result;
  result.family = family;
  double best_mean = std::numeric_limits<double>::infinity();
  // Ascending order plus strict improvement => ties break to smaller values.
  for (double value : grid) {
    LocalOptimizer opt = GdParams{};
    if (family == TuneFamily::adam) opt = AdamParams{value, 0.9, 0.999, 1e-8};
    if (family == TuneFamily::fire) opt = FireParams::from_lr(value);
    const double mean =
        mean_final_energy(task, family, opt, value, inits, rng, workers);
    result.points.push_back({value, mean});
    if (mean < best_mean) {
      best_mean = mean;
      result.best_value = value;
    }
  }
  return result;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

Eigen::VectorXd encode_start(TuneFamily family, const LocalOptimizer& start,
                             double bh_scale) {
  switch (family) {
    case TuneFamily::adam: {
      const auto& a = std::get<AdamParams>(start);
      Eigen::VectorXd u(4);
      u << std::log(a.lr), logit(a.beta1), logit(a.beta2), std::log(a.eps);
      return u;
    }
    case TuneFamily::fire: {
      const auto& fp = std::get<FireParams>(start);
      Eigen::VectorXd u(5);
      u << std::log(fp.dt0), logit(fp.alpha_start), std::log(fp.f_inc - 1.0),
          logit(fp.f_dec), logit(fp.f_alpha);
      return u;
    }
    case TuneFamily::bh: {
      Eigen::VectorXd u(1);
      u << std::log(bh_scale);
      return u;
    }
  }
  throw std::logic_error("encode_start: bad family");
}

}  // namespace

LocalOptimizer decode_local(TuneFamily family, const Eigen::VectorXd& raw) {
  if (family == TuneFamily::adam) {
    return AdamParams{std::exp(raw[0]), sigmoid(raw[1]), sigmoid(raw[2]),
                      std::exp(raw[3])};
  }
  if (family == TuneFamily::fire) {
    FireParams fp;
    fp.dt0 = std::exp(raw[0]);
    fp.dt_max = 10.0 * fp.dt0;
    fp.alpha_start = sigmoid(raw[1]);
    fp.f_inc = 1.0 + std::exp(raw[2]);
    fp.f_dec = sigmoid(raw[3]);
    fp.f_alpha = sigmoid(raw[4]);
    return fp;
  }
  throw std::invalid_argument("decode_local: bh has no local optimizer");
}

double decode_bh_scale(const Eigen::VectorXd& raw) { return std::exp(raw[0]); }

ScalarMetaResult tune_scalar_meta(const tasks::TaskSpec& task, TuneFamily family,
                                  const LocalOptimizer& start, double bh_step_scale,
                                  int outer_steps, RngStream rng, int k_inits,
                                  int n_pairs, int workers) {
  const auto inits = shared_inits(task, rng, k_inits);
  auto loss_of = [&](const Eigen::VectorXd& u) {
    if (family == TuneFamily::bh) {
      return mean_final_energy(task, family, GdParams{}, decode_bh_scale(u),
                               inits, rng, workers);
    }
    return mean_final_energy(task, family, decode_local(family, u), 0.0, inits,
                             rng, workers);
  };

  Eigen::VectorXd theta = encode_start(family, start, bh_step_scale);
  ScalarMetaResult best;
  best.family = family;
  best.best_raw = theta;
  best.best_loss = loss_of(theta);

  meta::OuterAdam outer(theta.size(), 1e-2, 1.0, 1);  // no decay
  RngStream es_rng = rng.fork(0xE5);
  for (int step = 0; step < outer_steps; ++step) {
    auto track = [&](const Eigen::VectorXd& u, double loss) {
      if (loss < best.best_loss) {
        best.best_loss = loss;
        best.best_raw = u;
      }
    };
    const Eigen::VectorXd grad = meta::es_gradient_generic(
        [&](const Eigen::VectorXd& u, int) { return loss_of(u); }, theta, 0.1,
        n_pairs, es_rng.fork(step), nullptr, 1, track);
    if (!grad.allFinite()) continue;
    outer.step(theta, grad);
  }
  const double final_loss = loss_of(theta);
  if (final_loss < best.best_loss) {
    best.best_loss = final_loss;
    best.best_raw = theta;
  }
  best.decoded.assign(best.best_raw.data(),
                      best.best_raw.data() + best.best_raw.size());
  return best;
}

TunedCache TunedCache::load(const std::string& path) {
  TunedCache cache;
  if (!textio::file_exists(path)) return cache;
  const auto doc = ordered_json::parse(textio::read_file(path));
  for (const auto& e : doc.at("entries")) {
    TunedEntry entry;
    entry.task = e.at("task").get<std::string>();
    entry.family = e.at("family").get<std::string>();
    entry.grid_value = e.at("grid_value").get<double>();
    entry.grid_mean = e.at("grid_mean").get<double>();
    entry.meta_mean = e.at("meta_mean").get<double>();
    entry.winner = e.at("winner").get<std::string>();
    entry.meta_scalars = e.at("meta_scalars").get<std::vector<double>>();
    cache.entries_.push_back(std::move(entry));
  }
  return cache;
}

void TunedCache::save(const std::string& path) const {
  auto sorted = entries_;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return std::tie(a.task, a.family) < std::tie(b.task, b.family);
  });
  ordered_json doc;
  doc["version"] = 1;
  doc["entries"] = ordered_json::array();
  for (const auto& e : sorted) {
    ordered_json j;
    j["task"] = e.task;
    j["family"] = e.family;
    j["grid_value"] = e.grid_value;
    j["grid_mean"] = e.grid_mean;
    j["meta_mean"] = e.meta_mean;
    j["winner"] = e.winner;
    j["meta_scalars"] = e.meta_scalars;
    doc["entries"].push_back(j);
  }
  textio::write_file(path, doc.dump(2) + "\n");
}

const TunedEntry* TunedCache::get(const std::string& task,
                                  const std::string& family) const {
  for (const auto& e : entries_) {
    if (e.task == task && e.family == family) return &e;
  }
  return nullptr;
}

void TunedCache::put(const TunedEntry& entry) {
  for (auto& e : entries_) {
    if (e.task == entry.task && e.family == entry.family) {
      e = entry;
      return;
    }
  }
  entries_.push_back(entry);
}

}  // namespace atomopt::optimizers
