#include "atomopt/potentials.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "atomopt/systems.hpp"

namespace atomopt::potentials {

namespace {

constexpr double kCoincident = 1e-12;
const double kNan = std::numeric_limits<double>::quiet_NaN();

void check_cell_for_cutoff(const Configuration& config, double cutoff,
                           const char* what) {
  if (config.cell && config.cell->edge <= 2.0 * cutoff) {
    throw std::invalid_argument(std::string(what) +
                                ": cell edge must exceed twice the cutoff");
  }
}

}  // namespace

void PairParamTable::set(int s1, int s2, const GuptaPairParams& params) {
  entries_[{std::min(s1, s2), std::max(s1, s2)}] = params;
}

bool PairParamTable::has(int s1, int s2) const {
  return entries_.count({std::min(s1, s2), std::max(s1, s2)}) > 0;
}

const GuptaPairParams& PairParamTable::lookup(int s1, int s2) const {
  auto it = entries_.find({std::min(s1, s2), std::max(s1, s2)});
  if (it == entries_.end()) {
    throw std::invalid_argument("PairParamTable: no parameters for species pair (" +
                                std::to_string(s1) + ", " + std::to_string(s2) + ")");
  }
  return it->second;
}

double lj_energy(const Configuration& config, const LennardJones& spec) {
  const auto n = config.n_atoms();
  double e = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = systems::distance(config.positions.row(i),
                                         config.positions.row(j), config.cell);
      if (d < kCoincident) return kNan;
      const double s3 = (spec.d0 / d) * (spec.d0 / d) * (spec.d0 / d);
      const double s6 = s3 * s3;
      e += spec.epsilon * (s6 * s6 - 2.0 * s6);
    }
  }
  return e;
}

double gupta_energy(const Configuration& config, const Gupta& spec) {
  const auto n = config.n_atoms();
  double repulsive = 0.0;
  std::vector<double> rho(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = systems::distance(config.positions.row(i),
                                         config.positions.row(j), config.cell);
      if (d < kCoincident) return kNan;
      const auto& pp = spec.table.lookup(config.species[i], config.species[j]);
      const double x = 1.0 - d / pp.d0;
      // Per-atom sums over j != i; each unordered pair feeds both atoms.
      repulsive += 2.0 * pp.A * std::exp(pp.p * x);
      const double hop = pp.xi * pp.xi * std::exp(2.0 * pp.q * x);
      rho[static_cast<std::size_t>(i)] += hop;
      rho[static_cast<std::size_t>(j)] += hop;
    }
  }
  double attractive = 0.0;
  for (double r : rho) attractive += std::sqrt(r);
  return repulsive - attractive;
}

namespace {

struct SwNeighbor {
  int j;
  double d;
  Vec3 unit;   // from i toward j
  double g;    // exp(gamma*sigma / (d - a*sigma))
  double gp;   // dg/dd
};

// Directed neighbor lists within the hard cutoff min(r_cut, a*sigma).
std::vector<std::vector<SwNeighbor>> sw_neighbors(const Configuration& config,
                                                  const StillingerWeber& spec,
                                                  bool* coincident) {
  const auto n = config.n_atoms();
  const double cutoff = std::min(spec.r_cut, spec.hard_cutoff());
  std::vector<std::vector<SwNeighbor>> nbrs(static_cast<std::size_t>(n));
  *coincident = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Vec3 dvec = systems::displacement(config.positions.row(i),
                                              config.positions.row(j), config.cell);
      const double d = dvec.norm();
      if (d < kCoincident) {
        *coincident = true;
        return nbrs;
      }
      if (d >= cutoff) continue;
      const double denom = d - spec.hard_cutoff();
      const double g = std::exp(spec.gamma * spec.sigma / denom);
      const double gp = -spec.gamma * spec.sigma / (denom * denom) * g;
      const Vec3 u = dvec / d;
      nbrs[static_cast<std::size_t>(i)].push_back({static_cast<int>(j), d, u, g, gp});
      nbrs[static_cast<std::size_t>(j)].push_back({static_cast<int>(i), d, -u, g, gp});
    }
  }
  return nbrs;
}

// Two-body term and its d-derivative.
void sw_pair_term(const StillingerWeber& spec, double d, double* e, double* de) {
  const double s = spec.sigma / d;
  const double sp = std::pow(s, spec.p);
  const double sq = spec.q == 0.0 ? 1.0 : std::pow(s, spec.q);
  const double denom = d - spec.hard_cutoff();
  const double expf = std::exp(spec.sigma / denom);
  const double poly = spec.B * sp - sq;
  *e = spec.A * spec.epsilon * poly * expf;
  const double dpoly = (-spec.B * spec.p * sp + spec.q * sq) / d;
  *de = spec.A * spec.epsilon * expf *
        (dpoly - poly * spec.sigma / (denom * denom));
}

}  // namespace

double sw_energy(const Configuration& config, const StillingerWeber& spec) {
  if (!config.cell) {
    throw std::invalid_argument("sw_energy: periodic configuration required");
  }
  check_cell_for_cutoff(config, std::min(spec.r_cut, spec.hard_cutoff()),
                        "sw_energy");
  bool coincident = false;
  const auto nbrs = sw_neighbors(config, spec, &coincident);
  if (coincident) return kNan;

  double e = 0.0;
  const auto n = config.n_atoms();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ni = nbrs[static_cast<std::size_t>(i)];
    // Pair terms, counted once per unordered pair.
    for (const auto& nb : ni) {
      if (nb.j <= i) continue;
      double ep, dep;
      sw_pair_term(spec, nb.d, &ep, &dep);
      e += ep;
    }
    // Angular terms over unordered neighbor pairs centered on i.
    const double le = spec.lambda * spec.epsilon;
    for (std::size_t a = 0; a < ni.size(); ++a) {
      for (std::size_t b = a + 1; b < ni.size(); ++b) {
        const double cos_t = ni[a].unit.dot(ni[b].unit);
        const double delta = cos_t - spec.cos_theta0;
        e += le * delta * delta * ni[a].g * ni[b].g;
      }
    }
  }
  return e;
}

double soft_sphere_energy(const Configuration& config, const SoftSphere& spec) {
  const auto n = config.n_atoms();
  double e = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = systems::distance(config.positions.row(i),
                                         config.positions.row(j), config.cell);
      if (d >= spec.sigma_d) continue;
      e += spec.epsilon * std::pow(1.0 - d / spec.sigma_d, spec.alpha) / spec.alpha;
    }
  }
  return e;
}

double energy(const Configuration& config, const PotentialSpec& spec) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LennardJones>) return lj_energy(config, s);
        else if constexpr (std::is_same_v<T, Gupta>) return gupta_energy(config, s);
        else if constexpr (std::is_same_v<T, StillingerWeber>) return sw_energy(config, s);
        else return soft_sphere_energy(config, s);
      },
      spec);
}

namespace {

void lj_forces(const Configuration& config, const LennardJones& spec,
               Positions& out) {
  const auto n = config.n_atoms();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Vec3 dvec = systems::displacement(config.positions.row(j),
                                              config.positions.row(i), config.cell);
      const double d = dvec.norm();
      if (d < kCoincident) {
        out.setConstant(kNan);
        return;
      }
      const double s3 = (spec.d0 / d) * (spec.d0 / d) * (spec.d0 / d);
      const double s6 = s3 * s3;
      // dE/dd for the pair.
      const double de = -12.0 * spec.epsilon * s6 * (s6 - 1.0) / d;
      const Vec3 f = (-de / d) * dvec;  // force on i along (x_i - x_j)
      out.row(i) += f;
      out.row(j) -= f;
    }
  }
}

void gupta_forces(const Configuration& config, const Gupta& spec,
                  Positions& out) {
  const auto n = config.n_atoms();
  std::vector<double> rho(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = systems::distance(config.positions.row(i),
                                         config.positions.row(j), config.cell);
      if (d < kCoincident) {
        out.setConstant(kNan);
        return;
      }
      const auto& pp = spec.table.lookup(config.species[i], config.species[j]);
      const double x = 1.0 - d / pp.d0;
      const double hop = pp.xi * pp.xi * std::exp(2.0 * pp.q * x);
      rho[static_cast<std::size_t>(i)] += hop;
      rho[static_cast<std::size_t>(j)] += hop;
    }
  }
  std::vector<double> inv_sqrt_rho(static_cast<std::size_t>(n), 0.0);
  for (std::size_t i = 0; i < rho.size(); ++i) {
    inv_sqrt_rho[i] = rho[i] > 0.0 ? 1.0 / (2.0 * std::sqrt(rho[i])) : 0.0;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Vec3 dvec = systems::displacement(config.positions.row(j),
                                              config.positions.row(i), config.cell);
      const double d = dvec.norm();
      const auto& pp = spec.table.lookup(config.species[i], config.species[j]);
      const double x = 1.0 - d / pp.d0;
      const double drep = -2.0 * pp.A * pp.p / pp.d0 * std::exp(pp.p * x);
      const double dhop = -2.0 * pp.q / pp.d0 * pp.xi * pp.xi * std::exp(2.0 * pp.q * x);
      const double w = inv_sqrt_rho[static_cast<std::size_t>(i)] +
                       inv_sqrt_rho[static_cast<std::size_t>(j)];
      const double de = drep - w * dhop;  // dE/dd for the pair
      const Vec3 f = (-de / d) * dvec;
      out.row(i) += f;
      out.row(j) -= f;
    }
  }
}

void sw_forces(const Configuration& config, const StillingerWeber& spec,
               Positions& out) {
  if (!config.cell) {
    throw std::invalid_argument("sw_energy: periodic configuration required");
  }
  check_cell_for_cutoff(config, std::min(spec.r_cut, spec.hard_cutoff()),
                        "sw_energy");
  bool coincident = false;
  const auto nbrs = sw_neighbors(config, spec, &coincident);
  if (coincident) {
    out.setConstant(kNan);
    return;
  }
  const auto n = config.n_atoms();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ni = nbrs[static_cast<std::size_t>(i)];
    for (const auto& nb : ni) {
      if (nb.j <= i) continue;
      double ep, dep;
      sw_pair_term(spec, nb.d, &ep, &dep);
      const Vec3 f = dep * nb.unit;  // -dE/dx_i with unit pointing i->j
      out.row(i) += f;
      out.row(nb.j) -= f;
    }
    const double le = spec.lambda * spec.epsilon;
    for (std::size_t a = 0; a < ni.size(); ++a) {
      for (std::size_t b = a + 1; b < ni.size(); ++b) {
        const auto& na = ni[a];
        const auto& nb = ni[b];
        const double cos_t = na.unit.dot(nb.unit);
        const double delta = cos_t - spec.cos_theta0;
        const double pref = le * delta * delta;
        const double dcos = 2.0 * le * delta * na.g * nb.g;
        // Radial parts: d/d(d_ij) and d/d(d_ik) of g(d_ij) g(d_ik).
        const double ra = pref * na.gp * nb.g;
        const double rb = pref * na.g * nb.gp;
        // Angular parts: gradient of cos(theta) wrt the two neighbors.
        const Vec3 dcos_da = (nb.unit - cos_t * na.unit) / na.d;
        const Vec3 dcos_db = (na.unit - cos_t * nb.unit) / nb.d;
        const Vec3 grad_a = ra * na.unit + dcos * dcos_da;  // dE/dx_j
        const Vec3 grad_b = rb * nb.unit + dcos * dcos_db;  // dE/dx_k
        out.row(na.j) -= grad_a;
        out.row(nb.j) -= grad_b;
        out.row(i) += grad_a + grad_b;
      }
    }
  }
}

void soft_sphere_forces(const Configuration& config, const SoftSphere& spec,
                        Positions& out) {
  const auto n = config.n_atoms();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Vec3 dvec = systems::displacement(config.positions.row(j),
                                              config.positions.row(i), config.cell);
      const double d = dvec.norm();
      if (d >= spec.sigma_d || d < kCoincident) continue;  // zero force at overlap
      const double de = -spec.epsilon / spec.sigma_d *
                        std::pow(1.0 - d / spec.sigma_d, spec.alpha - 1.0);
      const Vec3 f = (-de / d) * dvec;
      out.row(i) += f;
      out.row(j) -= f;
    }
  }
}

}  // namespace

void forces_into(const Configuration& config, const PotentialSpec& spec,
                 Positions& out) {
  out.resize(config.n_atoms(), 3);
  out.setZero();
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LennardJones>) lj_forces(config, s, out);
        else if constexpr (std::is_same_v<T, Gupta>) gupta_forces(config, s, out);
        else if constexpr (std::is_same_v<T, StillingerWeber>) sw_forces(config, s, out);
        else soft_sphere_forces(config, s, out);
      },
      spec);
}

Positions forces(const Configuration& config, const PotentialSpec& spec) {
  Positions out;
  forces_into(config, spec, out);
  return out;
}

Positions numerical_gradient(const Configuration& config,
                             const PotentialSpec& spec, double h) {
  if (h <= 0.0) throw std::invalid_argument("numerical_gradient: h must be > 0");
  Configuration probe = config;
  Positions grad(config.n_atoms(), 3);
  for (Eigen::Index i = 0; i < config.n_atoms(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const double orig = probe.positions(i, k);
      probe.positions(i, k) = orig + h;
      const double ep = energy(probe, spec);
      probe.positions(i, k) = orig - h;
      const double em = energy(probe, spec);
      probe.positions(i, k) = orig;
      grad(i, k) = (ep - em) / (2.0 * h);
    }
  }
  return grad;
}

double interaction_cutoff(const PotentialSpec& spec) {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, StillingerWeber>) {
          return std::min(s.r_cut, s.hard_cutoff());
        } else if constexpr (std::is_same_v<T, SoftSphere>) {
          return s.sigma_d;
        } else {
          return std::numeric_limits<double>::infinity();
        }
      },
      spec);
}

}  // namespace atomopt::potentials
