#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "atomopt/rng.hpp"

using atomopt::RngStream;

TEST_CASE("same seed and stream id give identical draws") {
  auto a = RngStream::root(42).fork(7);
  auto b = RngStream::root(42).fork(7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("forks are independent of parent consumption") {
  auto parent = RngStream::root(1);
  auto child_before = parent.fork(3);
  parent.next_u64();
  parent.next_u64();
  auto child_after = parent.fork(3);
  CHECK(child_before.next_u64() == child_after.next_u64());
}

TEST_CASE("different stream ids decorrelate") {
  auto a = RngStream::root(9).fork(0);
  auto b = RngStream::root(9).fork(1);
  int equal = 0;
  double corr = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double x = a.uniform() - 0.5;
    const double y = b.uniform() - 0.5;
    corr += x * y;
    if (x == y) ++equal;
  }
  CHECK(equal == 0);
  CHECK(std::abs(corr / n) < 0.01);
}

TEST_CASE("uniform stays in [0,1) with the right mean") {
  auto s = RngStream::root(5);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 3.0 / std::sqrt(12.0 * n));
}

TEST_CASE("normal moments") {
  auto s = RngStream::root(17);
  double sum = 0.0, sum2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}
