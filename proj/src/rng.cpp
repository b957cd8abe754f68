#include "xbar/rng.hpp"

#include <cmath>

namespace xbar {

double Rng::normal() {
  // u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

uint64_t Rng::mix(uint64_t h, uint64_t v) {
  uint64_t z = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng session_rng(uint64_t seed, int subop_id, int session) {
  uint64_t s = Rng::mix(seed, 0x5eedULL);
  s = Rng::mix(s, static_cast<uint64_t>(subop_id) + 1);
  s = Rng::mix(s, static_cast<uint64_t>(session) + 1);
  return Rng(s);
}

}  // namespace xbar
