#pragma once

#include <cstdint>
#include <random>

namespace xbar {

// Deterministic RNG wrapper. The engine (mt19937_64) has a fully specified
// sequence; the uniform/normal mappings are written out explicitly because the
// standard <random> distribution classes are allowed to differ between library
// implementations, which would break byte-identical reruns across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller. One value per call, no caching, so the
  // stream position is a pure function of the call count.
  double normal();

  // splitmix64-style mixing, used to derive independent sub-streams.
  static uint64_t mix(uint64_t h, uint64_t v);

 private:
  std::mt19937_64 eng_;
};

// Independent stream for one (sub-op, session) pair. Reordering or
// parallelizing sessions cannot change any session's draws.
Rng session_rng(uint64_t seed, int subop_id, int session);

}  // namespace xbar
