#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "atomopt/potentials.hpp"
#include "atomopt/rng.hpp"
#include "atomopt/systems.hpp"
#include "atomopt/tasks.hpp"

using namespace atomopt;
using namespace atomopt::potentials;

namespace {

Configuration dimer(double d) {
  Configuration c;
  c.positions.resize(2, 3);
  c.positions << 0, 0, 0, d, 0, 0;
  c.species = {0, 0};
  return c;
}

Configuration random_cluster(int n, double box, std::uint64_t seed,
                             bool preoptimize = true) {
  RngStream rng = RngStream::root(seed);
  Configuration c;
  c.positions.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) c.positions(i, k) = rng.uniform(0, box);
  }
  c.species.assign(n, 0);
  if (preoptimize) {
    const PotentialSpec pre = SoftSphere{};
    for (int s = 0; s < 1000; ++s) {
      c.positions += 1e-3 * forces(c, pre);
    }
  }
  return c;
}

double rel_force_error(const Configuration& c, const PotentialSpec& p,
                       double h = 1e-5) {
  const Positions analytic = forces(c, p);
  const Positions numeric = numerical_gradient(c, p, h);
  const double scale = std::max(analytic.array().abs().maxCoeff(), 1e-10);
  return (analytic + numeric).array().abs().maxCoeff() / scale;
}

const GuptaPairParams kAuAu = tasks::assign_params(
    tasks::builtin_gupta_rows("au55").front());

Gupta gold() {
  Gupta g;
  g.table.set(0, 0, kAuAu);
  return g;
}

}  // namespace

TEST_CASE("lennard-jones dimer values") {
  const LennardJones lj;
  CHECK(lj_energy(dimer(1.0), lj) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(lj_energy(dimer(2.0), lj) ==
        doctest::Approx(-0.031005859375).epsilon(1e-12));
  Configuration single = dimer(1.0);
  single.positions.conservativeResize(1, 3);
  single.species = {0};
  CHECK(lj_energy(single, lj) == 0.0);
}

TEST_CASE("lennard-jones dimer at d0 is a stationary point") {
  const PotentialSpec lj = LennardJones{};
  const Positions f = forces(dimer(1.0), lj);
  CHECK(f.array().abs().maxCoeff() < 1e-10);
}

TEST_CASE("coincident atoms yield the non-finite divergence signal") {
  const Configuration c = dimer(0.0);
  CHECK(diverged(lj_energy(c, LennardJones{})));
  CHECK(diverged(gupta_energy(c, gold())));
  CHECK(!forces(c, PotentialSpec{LennardJones{}}).allFinite());
  // The soft sphere is finite by construction, even at overlap.
  CHECK(soft_sphere_energy(c, SoftSphere{}) == doctest::Approx(0.5));
  CHECK(forces(c, PotentialSpec{SoftSphere{}}).allFinite());
}

TEST_CASE("gupta single atom and dimer conventions") {
  Configuration single;
  single.positions.resize(1, 3);
  single.positions.setZero();
  single.species = {0};
  CHECK(gupta_energy(single, gold()) == 0.0);

  // Per-atom / xi-inside-root convention vs the pairwise reading. The
  // implementation follows the per-atom form; the pairwise form differs by
  // a factor of two on a homonuclear dimer.
  const auto& p = kAuAu;
  const double per_atom = 2.0 * p.A - 2.0 * p.xi;
  const double pairwise = p.A - p.xi;
  const double got = gupta_energy(dimer(p.d0), gold());
  CHECK(got == doctest::Approx(per_atom).epsilon(1e-12));
  CHECK(std::abs(got - pairwise) > 1.0);
}

TEST_CASE("gupta missing pair parameters is a configuration error") {
  Configuration c = dimer(2.8);
  c.species = {0, 1};
  CHECK_THROWS_AS(gupta_energy(c, gold()), std::invalid_argument);
}

TEST_CASE("calibrated gold parameters bind at bulk-like strength") {
  // ~ -3.3 eV/atom for a 55-atom cluster; the swapped column reading gives
  // a few tenths of an eV at most.
  const auto& p = kAuAu;
  CHECK(p.A == doctest::Approx(0.2061));
  CHECK(p.xi == doctest::Approx(1.790));
}

TEST_CASE("soft sphere pair values and cutoff") {
  const SoftSphere ss;
  CHECK(soft_sphere_energy(dimer(0.5), ss) == doctest::Approx(0.125));
  CHECK(soft_sphere_energy(dimer(1.0), ss) == 0.0);
  CHECK(soft_sphere_energy(dimer(1.7), ss) == 0.0);
  // approaching the cutoff from below the energy vanishes continuously
  CHECK(soft_sphere_energy(dimer(1.0 - 1e-8), ss) < 1e-15);
}

namespace {

// Straight-line transcription of the two- and three-body terms, used as an
// independent oracle for the neighbor-list implementation.
double sw_oracle(const Configuration& c, const StillingerWeber& p) {
  const double cutoff = std::min(p.r_cut, p.a * p.sigma);
  const auto n = c.n_atoms();
  double e = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = systems::distance(c.positions.row(i), c.positions.row(j),
                                         c.cell);
      if (d >= cutoff) continue;
      const double s = p.sigma / d;
      e += p.A * p.epsilon *
           (p.B * std::pow(s, p.p) - std::pow(s, p.q)) *
           std::exp(p.sigma / (d - p.a * p.sigma));
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      for (Eigen::Index k = j + 1; k < n; ++k) {
        if (k == i) continue;
        const Vec3 rij = systems::displacement(c.positions.row(i),
                                               c.positions.row(j), c.cell);
        const Vec3 rik = systems::displacement(c.positions.row(i),
                                               c.positions.row(k), c.cell);
        const double dij = rij.norm();
        const double dik = rik.norm();
        if (dij >= cutoff || dik >= cutoff) continue;
        const double cos_t = rij.dot(rik) / (dij * dik);
        e += p.lambda * p.epsilon * std::pow(cos_t - p.cos_theta0, 2) *
             std::exp(p.gamma * p.sigma / (dij - p.a * p.sigma)) *
             std::exp(p.gamma * p.sigma / (dik - p.a * p.sigma));
      }
    }
  }
  return e;
}

Configuration perturbed_diamond(std::uint64_t seed, double amplitude) {
  Configuration c = systems::diamond_lattice(2, 5.248);
  RngStream rng = RngStream::root(seed);
  for (Eigen::Index i = 0; i < c.n_atoms(); ++i) {
    for (int k = 0; k < 3; ++k) c.positions(i, k) += amplitude * rng.normal();
  }
  return c;
}

}  // namespace

TEST_CASE("stillinger-weber requires a periodic cell") {
  Configuration c = dimer(2.3);
  CHECK_THROWS_AS(sw_energy(c, StillingerWeber{}), std::invalid_argument);
  // a cell must be wide enough for an unambiguous minimum image
  c.cell = CubicCell{5.0};
  CHECK_THROWS_AS(sw_energy(c, StillingerWeber{}), std::invalid_argument);
}

TEST_CASE("stillinger-weber isolated atom and cutoff branch") {
  const StillingerWeber sw;
  Configuration c;
  c.positions.resize(1, 3);
  c.positions.setZero();
  c.species = {0};
  c.cell = CubicCell{20.0};
  CHECK(sw_energy(c, sw) == 0.0);

  Configuration pair = dimer(sw.a * sw.sigma + 0.01);
  pair.cell = CubicCell{20.0};
  CHECK(sw_energy(pair, sw) == 0.0);
  // continuous approach to zero below the cutoff
  Configuration near = dimer(sw.r_cut - 1e-4);
  near.cell = CubicCell{20.0};
  CHECK(std::abs(sw_energy(near, sw)) < 1e-50);
}

TEST_CASE("stillinger-weber matches the straight-line oracle") {
  const StillingerWeber sw;
  const Configuration perfect = systems::diamond_lattice(2, 5.248);
  CHECK(sw_energy(perfect, sw) ==
        doctest::Approx(sw_oracle(perfect, sw)).epsilon(1e-12));
  // at the perfect lattice every angle is tetrahedral: three-body term
  // vanishes and the energy is 128 * theta2(nearest neighbor)
  const double nn = std::sqrt(3.0) / 4.0 * 5.248;
  const double s = sw.sigma / nn;
  const double theta2 = sw.A * sw.epsilon * (sw.B * std::pow(s, 4.0) - 1.0) *
                        std::exp(sw.sigma / (nn - sw.a * sw.sigma));
  CHECK(sw_energy(perfect, sw) == doctest::Approx(128.0 * theta2).epsilon(1e-9));

  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const Configuration c = perturbed_diamond(seed, 0.15);
    const double got = sw_energy(c, sw);
    const double want = sw_oracle(c, sw);
    CHECK(got == doctest::Approx(want).epsilon(1e-11));
  }
}

TEST_CASE("analytic forces match finite differences") {
  SUBCASE("lennard-jones") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Configuration c = random_cluster(8, 3.0, seed);
      CHECK(rel_force_error(c, LennardJones{}) < 1e-6);
    }
  }
  SUBCASE("gupta, mixed species") {
    Gupta g;
    for (const auto& row : tasks::builtin_gupta_rows("agau")) {
      const int s1 = row.s1 == "Ag" ? 0 : 1;
      const int s2 = row.s2 == "Ag" ? 0 : 1;
      g.table.set(s1, s2, tasks::assign_params(row));
    }
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Configuration c = random_cluster(8, 4.0, seed);
      for (int i = 0; i < 8; ++i) c.species[static_cast<std::size_t>(i)] = i % 2;
      CHECK(rel_force_error(c, g) < 1e-6);
    }
  }
  SUBCASE("stillinger-weber, periodic") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      CHECK(rel_force_error(perturbed_diamond(seed, 0.2), StillingerWeber{}) < 1e-6);
    }
  }
  SUBCASE("soft sphere with overlaps") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Configuration c = random_cluster(8, 1.6, seed, /*preoptimize=*/false);
      CHECK(rel_force_error(c, SoftSphere{}) < 1e-6);
    }
  }
}

TEST_CASE("free-space invariances") {
  const Configuration c = random_cluster(10, 3.0, 21);
  const PotentialSpec specs[] = {LennardJones{}, PotentialSpec{gold()},
                                 SoftSphere{}};
  for (const auto& spec : specs) {
    const double e0 = energy(c, spec);

    Configuration moved = c;
    moved.positions.rowwise() += Vec3{1.7, -2.3, 0.9};
    CHECK(energy(moved, spec) == doctest::Approx(e0).epsilon(1e-10));

    // rotation about an arbitrary axis
    const double angle = 0.83;
    Eigen::Matrix3d rot =
        Eigen::AngleAxisd(angle, Eigen::Vector3d{1, 2, -1}.normalized())
            .toRotationMatrix();
    Configuration rotated = c;
    rotated.positions = c.positions * rot.transpose();
    CHECK(energy(rotated, spec) == doctest::Approx(e0).epsilon(1e-9));

    // permutation of identical atoms (exact up to summation rounding)
    Configuration permuted = c;
    std::vector<int> order(static_cast<std::size_t>(c.n_atoms()));
    std::iota(order.begin(), order.end(), 0);
    std::reverse(order.begin(), order.end());
    for (std::size_t i = 0; i < order.size(); ++i) {
      permuted.positions.row(static_cast<Eigen::Index>(i)) =
          c.positions.row(order[i]);
    }
    CHECK(energy(permuted, spec) == doctest::Approx(e0).epsilon(1e-13));

    // forces sum to zero
    const Positions f = forces(c, spec);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(f.col(k).sum()) < 1e-9);
  }
}

TEST_CASE("periodic invariance: whole-edge translation of one atom") {
  const StillingerWeber sw;
  const Configuration c = perturbed_diamond(33, 0.1);
  const double e0 = sw_energy(c, sw);
  Configuration shifted = c;
  shifted.positions(5, 0) += c.cell->edge;
  shifted.positions(12, 2) -= 2.0 * c.cell->edge;
  CHECK(sw_energy(shifted, sw) == doctest::Approx(e0).epsilon(1e-10));
}

TEST_CASE("numerical gradient basics") {
  CHECK_THROWS_AS(numerical_gradient(dimer(1.0), PotentialSpec{LennardJones{}}, 0.0),
                  std::invalid_argument);
  // far-apart soft-sphere pair: zero gradient exactly
  const Positions g =
      numerical_gradient(dimer(3.0), PotentialSpec{SoftSphere{}}, 1e-5);
  CHECK(g.array().abs().maxCoeff() == 0.0);
  // h and h/2 show the expected O(h^2) decay on a smooth potential
  const Configuration c = random_cluster(6, 3.0, 5);
  const Positions exact = forces(c, PotentialSpec{LennardJones{}});
  const Positions g1 = numerical_gradient(c, PotentialSpec{LennardJones{}}, 1e-3);
  const Positions g2 = numerical_gradient(c, PotentialSpec{LennardJones{}}, 5e-4);
  const double e1 = (g1 + exact).array().abs().maxCoeff();
  const double e2 = (g2 + exact).array().abs().maxCoeff();
  CHECK(e2 < e1 * 0.4);  // ~ 4x reduction expected
}

TEST_CASE("interaction cutoffs for cell validation") {
  CHECK(std::isinf(interaction_cutoff(LennardJones{})));
  CHECK(interaction_cutoff(StillingerWeber{}) == doctest::Approx(3.77));
  CHECK(interaction_cutoff(SoftSphere{}) == doctest::Approx(1.0));
}
