#pragma once

#include <cmath>
#include <cstdint>

namespace atomopt {

/// Counter-based deterministic random stream.
///
/// Every draw is a pure function of (key, counter), so a stream forked for a
/// work item produces the same values no matter which thread consumes it or
/// in which order work items run. Forking derives an independent child key
/// and never disturbs the parent.
class RngStream {
 public:
  RngStream() = default;

  static RngStream root(std::uint64_t seed) {
    return RngStream(mix(seed ^ 0x9e3779b97f4a7c15ull));
  }

  /// Independent child stream identified by `id`; the parent is unchanged.
  RngStream fork(std::uint64_t id) const {
    return RngStream(mix(key_ ^ mix(id + 0x632be59bd9b4e019ull)));
  }

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() {
    return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_);
  }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; two u64 draws per value.
  double normal() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.28318530717958647692 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  // splitmix64 finalizer; full 64-bit avalanche.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace atomopt
