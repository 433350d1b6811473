#pragma once

#include <cstdint>
#include <random>

namespace hnko {

/// Portable seeded generator used for noise and parameter initialisation.
///
/// Engine: std::mt19937_64 (64-bit Mersenne Twister, fully specified by the
/// C++ standard) seeded with the user seed.
/// uniform(): (engine() >> 11) * 2^-53, i.e. a double in [0, 1).
/// normal(): Box-Muller on u1 = 1 - uniform() (so u1 in (0, 1]) and
/// u2 = uniform(): z0 = sqrt(-2 ln u1) cos(2 pi u2) is returned first and
/// z1 = sqrt(-2 ln u1) sin(2 pi u2) is cached for the next call.
/// Reimplementations that follow these three rules reproduce the stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace hnko
