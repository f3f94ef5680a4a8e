#pragma once

#include <cmath>
#include <cstdint>

namespace gibbsrelax {

inline std::uint64_t splitmix64_step(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Child seed for trial `index` of master `seed`; the documented mixing function.
inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64_step(s);
  s = a ^ (index * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull);
  return splitmix64_step(s);
}

// Deterministic across platforms: splitmix64 stream, hand-rolled deviates.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64_step(state_); }

  // Uniform in [0,1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in {0,...,m-1}; m must be >= 1.
  std::uint64_t uniform_index(std::uint64_t m) {
    // Rejection keeps the draw exactly uniform.
    std::uint64_t lim = std::uint64_t(-1) - std::uint64_t(-1) % m;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= lim);
    return x % m;
  }

  // Standard normal via Box-Muller; second deviate cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // +1 or -1 with equal probability.
  double rademacher() { return (next_u64() & 1) ? -1.0 : 1.0; }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gibbsrelax
