#include "hnko/rng.hpp"

#include <cmath>
#include <numbers>

namespace hnko {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double phase = 2.0 * std::numbers::pi * u2;
  cached_ = radius * std::sin(phase);
  has_cached_ = true;
  return radius * std::cos(phase);
}

}  // namespace hnko
