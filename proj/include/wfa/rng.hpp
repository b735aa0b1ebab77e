#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "wfa/error.hpp"

namespace wfa {

// Every random choice in the library flows from one of these. 64-bit so that
// derived per-sample streams do not collide at desk scale.
struct Seed {
  std::uint64_t value = 0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent child seed for stream k. Used to split one master seed into
// per-sample / per-trial streams without sharing state.
inline Seed derive_seed(Seed s, std::uint64_t k) {
  return Seed{splitmix64(s.value ^ splitmix64(k))};
}

// mt19937_64 is fully pinned by the standard; the float mappings below are
// explicit so results never depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(Seed s) : engine_(s.value) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1) with 53-bit resolution
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased integer in [0, n)
  std::uint64_t uniform_under(std::uint64_t n) {
    if (n == 0) throw BadCount("Rng::uniform_under: n must be positive");
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  // standard normal via Box-Muller (no cached spare)
  double gaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace wfa
