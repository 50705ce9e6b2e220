#include "affect/prng.hpp"

#include <cmath>
#include <numbers>

namespace affect {

double Prng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Prng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::size_t Prng::index(std::size_t n) {
  if (n == 0) return 0;
  auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return k < n ? k : n - 1;
}

}  // namespace affect
