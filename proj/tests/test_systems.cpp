#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "atomopt/rng.hpp"
#include "atomopt/systems.hpp"

using namespace atomopt;
using namespace atomopt::systems;

TEST_CASE("free-space displacement is b - a") {
  const Vec3 d = displacement(Vec3{0, 0, 0}, Vec3{1, 0, 0}, std::nullopt);
  CHECK(d == Vec3{1, 0, 0});
  CHECK(displacement(Vec3{1, 2, 3}, Vec3{1, 2, 3}, std::nullopt).norm() == 0.0);
}

TEST_CASE("minimum image wraps into (-edge/2, edge/2]") {
  const CubicCell cell{4.0};
  const Vec3 d = displacement(Vec3{0, 0, 0}, Vec3{3.5, 0, 0}, cell);
  CHECK(d[0] == doctest::Approx(-0.5));
  // half-edge boundary lands on the positive side
  const Vec3 h = displacement(Vec3{0, 0, 0}, Vec3{2.0, 0, 0}, cell);
  CHECK(h[0] == doctest::Approx(2.0));
  const Vec3 hm = displacement(Vec3{0, 0, 0}, Vec3{-2.0, 0, 0}, cell);
  CHECK(hm[0] == doctest::Approx(2.0));
}

TEST_CASE("displacement antisymmetry in both boundary modes") {
  RngStream rng = RngStream::root(3);
  const CubicCell cell{5.0};
  for (int i = 0; i < 200; ++i) {
    const Vec3 a{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
    const Vec3 b{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
    CHECK((displacement(a, b, std::nullopt) + displacement(b, a, std::nullopt)).norm() ==
          doctest::Approx(0.0));
    const Vec3 f = displacement(a, b, cell);
    const Vec3 r = displacement(b, a, cell);
    for (int k = 0; k < 3; ++k) {
      // components are negatives modulo a full cell edge
      const double wrap = std::abs(f[k] + r[k]);
      CHECK((wrap < 1e-12 || std::abs(wrap - cell.edge) < 1e-12));
    }
  }
}

TEST_CASE("periodic displacement ignores whole-cell translations") {
  RngStream rng = RngStream::root(4);
  const CubicCell cell{3.7};
  for (int i = 0; i < 200; ++i) {
    const Vec3 a{rng.uniform(0, 3.7), rng.uniform(0, 3.7), rng.uniform(0, 3.7)};
    Vec3 b{rng.uniform(0, 3.7), rng.uniform(0, 3.7), rng.uniform(0, 3.7)};
    const Vec3 base = displacement(a, b, cell);
    for (int k = 0; k < 3; ++k) {
      b[k] += cell.edge * std::floor(rng.uniform(-3, 4));
    }
    CHECK((displacement(a, b, cell) - base).norm() < 1e-9);
  }
}

namespace {

// Independent pair enumeration with the wrap formula written out directly.
std::vector<std::tuple<int, int, double>> brute_pairs(const Configuration& c,
                                                      double cutoff) {
  std::vector<std::tuple<int, int, double>> out;
  for (int i = 0; i < c.n_atoms(); ++i) {
    for (int j = i + 1; j < c.n_atoms(); ++j) {
      double d2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        double diff = c.positions(j, k) - c.positions(i, k);
        if (c.cell) {
          const double edge = c.cell->edge;
          while (diff > edge / 2) diff -= edge;
          while (diff <= -edge / 2) diff += edge;
        }
        d2 += diff * diff;
      }
      const double d = std::sqrt(d2);
      if (d < cutoff) out.emplace_back(i, j, d);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("neighbor pairs: two-atom cases") {
  Configuration c;
  c.positions.resize(2, 3);
  c.positions << 0, 0, 0, 1, 0, 0;
  c.species = {0, 0};
  auto pairs = neighbor_pairs(c, 2.5);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].i == 0);
  CHECK(pairs[0].j == 1);
  CHECK(pairs[0].dist == doctest::Approx(1.0));
  CHECK(neighbor_pairs(c, 0.5).empty());
}

TEST_CASE("neighbor pairs match the brute-force oracle") {
  RngStream rng = RngStream::root(11);
  for (int trial = 0; trial < 20; ++trial) {
    Configuration c;
    const int n = 10;
    c.positions.resize(n, 3);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < 3; ++k) c.positions(i, k) = rng.uniform(0, 6.0);
    }
    c.species.assign(n, 0);
    if (trial % 2 == 1) c.cell = CubicCell{6.0};
    const double cutoff = rng.uniform(0.5, 2.9);
    const auto got = neighbor_pairs(c, cutoff);
    const auto want = brute_pairs(c, cutoff);
    REQUIRE(got.size() == want.size());
    for (std::size_t p = 0; p < got.size(); ++p) {
      CHECK(got[p].i == std::get<0>(want[p]));
      CHECK(got[p].j == std::get<1>(want[p]));
      CHECK(got[p].dist == doctest::Approx(std::get<2>(want[p])).epsilon(1e-12));
    }
  }
}

TEST_CASE("diamond lattice geometry") {
  const auto c1 = diamond_lattice(1, 5.248);
  CHECK(c1.n_atoms() == 8);
  REQUIRE(c1.cell.has_value());
  CHECK(c1.cell->edge == doctest::Approx(5.248));

  const auto c2 = diamond_lattice(2, 5.248);
  CHECK(c2.n_atoms() == 64);
  CHECK(c2.cell->edge == doctest::Approx(10.496));

  // every atom's nearest neighbor sits at sqrt(3)/4 * cell_edge
  const double expected = std::sqrt(3.0) / 4.0 * 5.248;
  const auto pairs = neighbor_pairs(c2, expected * 1.01);
  std::vector<int> degree(64, 0);
  for (const auto& p : pairs) {
    CHECK(std::abs(p.dist - expected) / expected < 1e-10);
    degree[p.i]++;
    degree[p.j]++;
  }
  for (int d : degree) CHECK(d == 4);  // tetrahedral coordination

  CHECK_THROWS_AS(diamond_lattice(0, 5.248), std::invalid_argument);
  CHECK_THROWS_AS(diamond_lattice(1, -1.0), std::invalid_argument);
}

TEST_CASE("random box init: bounds, determinism, moments") {
  const Eigen::Index n = 40000;
  std::vector<int> species(n, 0);
  const auto a = random_box_init(n, species, 3.0, RngStream::root(8).fork(1));
  const auto b = random_box_init(n, species, 3.0, RngStream::root(8).fork(1));
  CHECK(a.positions == b.positions);
  CHECK(a.positions.minCoeff() >= 0.0);
  CHECK(a.positions.maxCoeff() <= 3.0);
  const double sigma_mean = 3.0 / std::sqrt(12.0 * static_cast<double>(n));
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(a.positions.col(k).mean() - 1.5) < 3.0 * sigma_mean);
  }
  CHECK_THROWS_AS(random_box_init(0, {}, 3.0, RngStream::root(1)),
                  std::invalid_argument);
}
