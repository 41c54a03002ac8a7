#include "atomopt/learnedopt.hpp"

#include <cmath>
#include <stdexcept>

#include "atomopt/jsonfmt.hpp"
#include "atomopt/potentials.hpp"
#include "atomopt/systems.hpp"
#include "atomopt/textio.hpp"

namespace atomopt::learned {

using nlohmann::ordered_json;

int FeatureConfig::feature_count() const {
  const int d = static_cast<int>(decays.size());
  int f = 0;
  if (use_gradients) f += 2;
  if (use_positions) f += 2;
  if (use_decays) f += 4 * d;
  if (use_adam_like) f += 4 * d;
  if (use_particle_count) f += 2;
  if (use_species) f += max_species;
  if (use_sine) f += static_cast<int>(timescales.size());
  if (use_radial) f += 2 * static_cast<int>(etas.size()) * max_species;
  return f;
}

Eigen::Index LearnedOptParams::n_scalars() const {
  Eigen::Index n = 3;  // alpha, beta, gamma
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

LearnedOptState LearnedOptState::like(const Configuration& config,
                                      const FeatureConfig& fc) {
  LearnedOptState st;
  const auto rows = config.n_atoms() * 3;
  const auto cols = static_cast<Eigen::Index>(fc.decays.size());
  st.m = Eigen::MatrixXd::Zero(rows, cols);
  st.v = Eigen::MatrixXd::Zero(rows, cols);
  st.t = 0;
  return st;
}

std::pair<double, double> logmag(double x, double p) {
  if (std::abs(x) > std::exp(-p)) {
    return {std::log(std::abs(x)) / p, x > 0.0 ? 1.0 : -1.0};
  }
  return {-1.0, x * std::exp(p)};
}

Eigen::MatrixXd radial_features(const Configuration& config,
                                const FeatureConfig& fc) {
  const auto n = config.n_atoms();
  const int ne = static_cast<int>(fc.etas.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, fc.max_species * ne);
  const double c = fc.radial_cutoff;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (config.species[static_cast<std::size_t>(i)] >= fc.max_species) {
      throw std::invalid_argument("radial_features: species id exceeds max_species");
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = systems::distance(config.positions.row(i),
                                         config.positions.row(j), config.cell);
      if (d > c) continue;
      const double gate = 0.5 * (std::cos(M_PI * d / c) + 1.0);
      const double d2 = d * d;
      const int si = config.species[static_cast<std::size_t>(i)];
      const int sj = config.species[static_cast<std::size_t>(j)];
      for (int e = 0; e < ne; ++e) {
        const double w = std::exp(-fc.etas[static_cast<std::size_t>(e)] * d2) * gate;
        out(i, sj * ne + e) += w;
        out(j, si * ne + e) += w;
      }
    }
  }
  return out;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_param_shapes(const LearnedOptParams& params, const FeatureConfig& fc) {
  if (params.weights.empty() || params.weights.size() != params.biases.size()) {
    throw std::invalid_argument("learned optimizer: malformed parameter set");
  }
  Eigen::Index in = fc.feature_count();
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    if (params.weights[l].cols() != in ||
        params.weights[l].rows() != params.biases[l].size()) {
      throw std::invalid_argument("learned optimizer: layer width mismatch");
    }
    in = params.weights[l].rows();
  }
  if (in != 2) {
    throw std::invalid_argument("learned optimizer: output width must be 2");
  }
}

// Writes the feature matrix into `out` (resized as needed). `g` is the flat
// (atom, axis) gradient vector.
void build_features_into(const Configuration& config, const Eigen::VectorXd& g,
                         const LearnedOptState& state, const FeatureConfig& fc,
                         Eigen::MatrixXd& out) {
  const auto n = config.n_atoms();
  const auto rows = n * 3;
  const int f_total = fc.feature_count();
  const int nd = static_cast<int>(fc.decays.size());
  if (state.m.rows() != rows || g.size() != rows) {
    throw std::invalid_argument("build_features: state/config shape mismatch");
  }
  out.resize(rows, f_total);

  const double p = fc.logmag_p;
  // EMAs were updated with the current gradients before feature build, so
  // the bias correction counts t+1 applications.
  const double n_updates = static_cast<double>(state.t + 1);

  Eigen::MatrixXd radial;
  if (fc.use_radial) radial = radial_features(config, fc);

  Positions pos_feat;
  if (fc.use_positions) {
    pos_feat = config.positions;
    if (config.cell) {
      const double edge = config.cell->edge;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) {
          pos_feat(i, k) -= edge * std::floor(pos_feat(i, k) / edge);
        }
      }
    } else if (fc.centroid_relative_positions) {
      const Vec3 centroid = pos_feat.colwise().mean();
      pos_feat.rowwise() -= centroid;
    }
  }

  std::vector<double> sine(fc.timescales.size());
  for (std::size_t s = 0; s < sine.size(); ++s) {
    sine[s] = std::sin(static_cast<double>(state.t) / fc.timescales[s]);
  }
  const auto n_feat = logmag(static_cast<double>(n), p);

  std::vector<double> bc1(static_cast<std::size_t>(nd)), bc2(bc1.size());
  for (int k = 0; k < nd; ++k) {
    const double decay = fc.decays[static_cast<std::size_t>(k)];
    bc1[static_cast<std::size_t>(k)] = 1.0 - std::pow(decay, n_updates);
    bc2[static_cast<std::size_t>(k)] = bc1[static_cast<std::size_t>(k)];
  }

  for (Eigen::Index rc = 0; rc < rows; ++rc) {
    const Eigen::Index atom = rc / 3;
    const int axis = static_cast<int>(rc % 3);
    int col = 0;
    auto put_pair = [&](double value) {
      const auto [lm, sg] = logmag(value, p);
      out(rc, col++) = lm;
      out(rc, col++) = sg;
    };
    if (fc.use_gradients) put_pair(g[rc]);
    if (fc.use_positions) put_pair(pos_feat(atom, axis));
    if (fc.use_decays) {
      for (int k = 0; k < nd; ++k) {
        put_pair(state.m(rc, k));
        put_pair(state.v(rc, k));
      }
    }
    if (fc.use_adam_like) {
      for (int k = 0; k < nd; ++k) {
        const double mhat = state.m(rc, k) / bc1[static_cast<std::size_t>(k)];
        const double vhat = state.v(rc, k) / bc2[static_cast<std::size_t>(k)];
        const double inv = 1.0 / (std::sqrt(vhat) + 1e-8);
        put_pair(mhat * inv);
        put_pair(inv);
      }
    }
    if (fc.use_particle_count) {
      out(rc, col++) = n_feat.first;
      out(rc, col++) = n_feat.second;
    }
    if (fc.use_species) {
      const int sp = config.species[static_cast<std::size_t>(atom)];
      for (int s = 0; s < fc.max_species; ++s) {
        out(rc, col++) = s == sp ? 1.0 : 0.0;
      }
    }
    if (fc.use_sine) {
      for (double sv : sine) out(rc, col++) = sv;
    }
    if (fc.use_radial) {
      for (Eigen::Index ch = 0; ch < radial.cols(); ++ch) {
        put_pair(radial(atom, ch));
      }
    }
  }
}

// Forward pass into preallocated buffers; returns (m, d) columns of `head`.
void mlp_forward_into(const Eigen::MatrixXd& features,
                      const LearnedOptParams& params,
                      std::vector<Eigen::MatrixXd>& acts, Eigen::MatrixXd& head) {
  const std::size_t n_layers = params.weights.size();
  acts.resize(n_layers > 0 ? n_layers - 1 : 0);
  const Eigen::MatrixXd* in = &features;
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    acts[l].noalias() = (*in) * params.weights[l].transpose();
    acts[l].rowwise() += params.biases[l].transpose();
    acts[l] = acts[l].cwiseMax(0.0);
    in = &acts[l];
  }
  head.noalias() = (*in) * params.weights.back().transpose();
  head.rowwise() += params.biases.back().transpose();
}

struct Engine {
  const potentials::PotentialSpec& pot;
  const LearnedOptParams& params;
  const FeatureConfig& fc;
  LearnedOptState state;
  Positions forces;
  Eigen::VectorXd grads;
  Eigen::MatrixXd features;
  std::vector<Eigen::MatrixXd> acts;
  Eigen::MatrixXd head;

  Engine(const potentials::PotentialSpec& p, const LearnedOptParams& w,
         const FeatureConfig& f, LearnedOptState st)
      : pot(p), params(w), fc(f), state(std::move(st)) {
    check_param_shapes(w, f);
  }

  // Returns false on non-finite forces. When `apply` is false the update is
  // computed but positions stay frozen (probing mode).
  bool step(Configuration& config, bool apply, double* update_norm) {
    potentials::forces_into(config, pot, forces);
    if (!forces.allFinite()) return false;
    grads = -flat(forces);

    for (int k = 0; k < state.m.cols(); ++k) {
      const double decay = fc.decays[static_cast<std::size_t>(k)];
      state.m.col(k) = decay * state.m.col(k) + (1.0 - decay) * grads;
      state.v.col(k).array() =
          decay * state.v.col(k).array() + (1.0 - decay) * grads.array().square();
    }

    build_features_into(config, grads, state, fc, features);
    mlp_forward_into(features, params, acts, head);

    double norm2 = 0.0;
    auto x = flat(config.positions);
    for (Eigen::Index rc = 0; rc < x.size(); ++rc) {
      const double gate = sigmoid(params.beta * head(rc, 0) + params.gamma);
      const double dx = params.alpha * head(rc, 1) * gate;
      norm2 += dx * dx;
      if (apply) x[rc] += dx;
    }
    if (update_norm) *update_norm = std::sqrt(norm2);
    state.t += 1;
    return true;
  }
};

}  // namespace

Eigen::MatrixXd build_features(const Configuration& config,
                               const Positions& grads,
                               const LearnedOptState& state,
                               const FeatureConfig& fc) {
  Eigen::MatrixXd out;
  const Eigen::VectorXd g = flat(grads);
  build_features_into(config, g, state, fc, out);
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> mlp_forward(
    const Eigen::MatrixXd& features, const LearnedOptParams& params) {
  if (params.weights.empty() || features.cols() != params.weights[0].cols()) {
    throw std::invalid_argument("mlp_forward: feature width mismatch");
  }
  std::vector<Eigen::MatrixXd> acts;
  Eigen::MatrixXd head;
  mlp_forward_into(features, params, acts, head);
  return {head.col(0), head.col(1)};
}

std::pair<Configuration, LearnedOptState> learned_step(
    const Configuration& config, const potentials::PotentialSpec& spec,
    LearnedOptState state, const LearnedOptParams& params,
    const FeatureConfig& fc) {
  Engine engine(spec, params, fc, std::move(state));
  Configuration out = config;
  if (!engine.step(out, true, nullptr)) {
    throw std::domain_error("learned_step: non-finite forces (diverged configuration)");
  }
  return {std::move(out), std::move(engine.state)};
}

LearnedOptParams init_params(const FeatureConfig& fc, RngStream rng) {
  LearnedOptParams params;
  std::vector<Eigen::Index> dims;
  dims.push_back(fc.feature_count());
  for (int h : fc.hidden) dims.push_back(h);
  dims.push_back(2);

  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const Eigen::Index fan_in = dims[l];
    const Eigen::Index fan_out = dims[l + 1];
    Eigen::MatrixXd w(fan_out, fan_in);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(fan_out);
    const bool output_layer = l + 2 == dims.size();
    if (output_layer) {
      w.setZero();
    } else {
      const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index r = 0; r < fan_out; ++r) {
        for (Eigen::Index c = 0; c < fan_in; ++c) w(r, c) = stddev * rng.normal();
      }
    }
    params.weights.push_back(std::move(w));
    params.biases.push_back(std::move(b));
  }
  params.alpha = 0.1;
  params.beta = 1.0;
  params.gamma = -3.0;
  return params;
}

optimizers::Trajectory run_learned(const tasks::TaskSpec& task,
                                   const LearnedOptParams& params,
                                   const FeatureConfig& fc,
                                   const Configuration& init, long steps,
                                   long stride) {
  if (steps < 0) throw std::invalid_argument("run_learned: steps must be >= 0");
  if (stride < 1) stride = std::max<long>(steps, 1);

  optimizers::Trajectory traj;
  Configuration cur = init;
  const double e0 = potentials::energy(cur, task.potential);
  traj.samples.push_back({0, e0});
  if (potentials::diverged(e0)) {
    traj.final_config = cur;
    traj.final_energy = e0;
    traj.diverged = true;
    return traj;
  }
  if (steps == 0) {
    traj.final_config = std::move(cur);
    traj.final_energy = e0;
    return traj;
  }

  Engine engine(task.potential, params, fc,
                LearnedOptState::like(init, fc));
  Positions prev = cur.positions;
  long done = 0;
  for (long t = 1; t <= steps; ++t) {
    prev = cur.positions;
    if (!engine.step(cur, true, nullptr) || !cur.positions.allFinite()) {
      traj.diverged = true;
      if (!cur.positions.allFinite()) cur.positions = prev;
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
    }
  }
  traj.steps = done;
  if (!traj.diverged) {
    traj.final_config = std::move(cur);
    traj.final_energy = traj.samples.back().energy;
    return traj;
  }
  for (const Positions* cand : {&cur.positions, &prev}) {
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
  traj.final_energy = e0;
  return traj;
}

UnrollResult unroll(const tasks::TaskSpec& task, const LearnedOptParams& params,
                    const FeatureConfig& fc, const Configuration& init,
                    long steps, long log_stride) {
  if (!task.normalizer) {
    throw std::invalid_argument("unroll: task " + task.name + " has no normalizer");
  }
  UnrollResult result;
  result.trajectory = run_learned(task, params, fc, init, steps, log_stride);
  result.normalized_final =
      tasks::normalize(result.trajectory.final_energy, *task.normalizer);
  return result;
}

std::vector<double> probe_at_minimum(const tasks::TaskSpec& task,
                                     const LearnedOptParams& params,
                                     const FeatureConfig& fc,
                                     const Configuration& gm_config,
                                     long steps) {
  Engine engine(task.potential, params, fc,
                LearnedOptState::like(gm_config, fc));
  Configuration frozen = gm_config;
  std::vector<double> norms;
  norms.reserve(static_cast<std::size_t>(steps));
  for (long t = 0; t < steps; ++t) {
    double norm = 0.0;
    if (!engine.step(frozen, false, &norm)) break;
    norms.push_back(norm);
  }
  return norms;
}

Eigen::VectorXd to_vector(const LearnedOptParams& params) {
  Eigen::VectorXd v(params.n_scalars());
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const auto& w = params.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) v[at++] = w(r, c);
    }
    for (Eigen::Index r = 0; r < params.biases[l].size(); ++r) {
      v[at++] = params.biases[l][r];
    }
  }
  v[at++] = params.alpha;
  v[at++] = params.beta;
  v[at++] = params.gamma;
  return v;
}

LearnedOptParams from_vector(const FeatureConfig& fc, const Eigen::VectorXd& v) {
  LearnedOptParams params;
  std::vector<Eigen::Index> dims;
  dims.push_back(fc.feature_count());
  for (int h : fc.hidden) dims.push_back(h);
  dims.push_back(2);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    Eigen::VectorXd b(dims[l + 1]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = v[at++];
    }
    for (Eigen::Index r = 0; r < b.size(); ++r) b[r] = v[at++];
    params.weights.push_back(std::move(w));
    params.biases.push_back(std::move(b));
  }
  params.alpha = v[at++];
  params.beta = v[at++];
  params.gamma = v[at++];
  if (at != v.size()) {
    throw std::invalid_argument("from_vector: size mismatch");
  }
  return params;
}

ordered_json feature_config_to_json(const FeatureConfig& fc) {
  ordered_json j;
  j["etas"] = fc.etas;
  j["radial_cutoff"] = fc.radial_cutoff;
  j["logmag_p"] = fc.logmag_p;
  j["timescales"] = fc.timescales;
  j["decays"] = fc.decays;
  j["max_species"] = fc.max_species;
  j["hidden"] = fc.hidden;
  j["use_gradients"] = fc.use_gradients;
  j["use_positions"] = fc.use_positions;
  j["use_decays"] = fc.use_decays;
  j["use_adam_like"] = fc.use_adam_like;
  j["use_particle_count"] = fc.use_particle_count;
  j["use_species"] = fc.use_species;
  j["use_sine"] = fc.use_sine;
  j["use_radial"] = fc.use_radial;
  j["centroid_relative_positions"] = fc.centroid_relative_positions;
  return j;
}

FeatureConfig feature_config_from_json(const ordered_json& j) {
  FeatureConfig fc;
  fc.etas = j.at("etas").get<std::vector<double>>();
  fc.radial_cutoff = j.at("radial_cutoff").get<double>();
  fc.logmag_p = j.at("logmag_p").get<double>();
  fc.timescales = j.at("timescales").get<std::vector<double>>();
  fc.decays = j.at("decays").get<std::vector<double>>();
  fc.max_species = j.at("max_species").get<int>();
  fc.hidden = j.at("hidden").get<std::vector<int>>();
  fc.use_gradients = j.at("use_gradients").get<bool>();
  fc.use_positions = j.at("use_positions").get<bool>();
  fc.use_decays = j.at("use_decays").get<bool>();
  fc.use_adam_like = j.at("use_adam_like").get<bool>();
  fc.use_particle_count = j.at("use_particle_count").get<bool>();
  fc.use_species = j.at("use_species").get<bool>();
  fc.use_sine = j.at("use_sine").get<bool>();
  fc.use_radial = j.at("use_radial").get<bool>();
  fc.centroid_relative_positions = j.at("centroid_relative_positions").get<bool>();
  return fc;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  ordered_json j;
  j["version"] = 1;
  j["features"] = feature_config_to_json(ckpt.features);
  j["layers"] = ordered_json::array();
  for (std::size_t l = 0; l < ckpt.params.weights.size(); ++l) {
    const auto& w = ckpt.params.weights[l];
    ordered_json layer;
    layer["out"] = w.rows();
    layer["in"] = w.cols();
    std::vector<double> flat_w;
    flat_w.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat_w.push_back(w(r, c));
    }
    layer["w"] = flat_w;
    layer["b"] = std::vector<double>(ckpt.params.biases[l].data(),
                                     ckpt.params.biases[l].data() +
                                         ckpt.params.biases[l].size());
    j["layers"].push_back(layer);
  }
  j["alpha"] = ckpt.params.alpha;
  j["beta"] = ckpt.params.beta;
  j["gamma"] = ckpt.params.gamma;
  j["seed"] = ckpt.seed;
  j["update_index"] = ckpt.update_index;
  textio::write_file(path, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  const auto j = ordered_json::parse(textio::read_file(path));
  if (j.at("version").get<int>() != 1) {
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  }
  Checkpoint ckpt;
  ckpt.features = feature_config_from_json(j.at("features"));
  for (const auto& layer : j.at("layers")) {
    const auto rows = layer.at("out").get<Eigen::Index>();
    const auto cols = layer.at("in").get<Eigen::Index>();
    const auto flat_w = layer.at("w").get<std::vector<double>>();
    const auto flat_b = layer.at("b").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat_w.size()) != rows * cols ||
        static_cast<Eigen::Index>(flat_b.size()) != rows) {
      throw std::runtime_error("checkpoint: layer shape mismatch in " + path);
    }
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        w(r, c) = flat_w[static_cast<std::size_t>(r * cols + c)];
      }
    }
    ckpt.params.weights.push_back(std::move(w));
    ckpt.params.biases.push_back(
        Eigen::Map<const Eigen::VectorXd>(flat_b.data(), rows));
  }
  ckpt.params.alpha = j.at("alpha").get<double>();
  ckpt.params.beta = j.at("beta").get<double>();
  ckpt.params.gamma = j.at("gamma").get<double>();
  ckpt.seed = j.at("seed").get<std::uint64_t>();
  ckpt.update_index = j.at("update_index").get<long>();
  check_param_shapes(ckpt.params, ckpt.features);
  return ckpt;
}

}  // namespace atomopt::learned
