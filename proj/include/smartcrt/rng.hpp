#pragma once

#include <cmath>
#include <cstdint>

namespace smartcrt {

// SplitMix64 step: advances the state by the 64-bit golden ratio and mixes.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Fixed seed-splitting function: stream seed for replication `index` under
// `master_seed`. Depends on the pair alone, not on execution order, so
// threaded Monte Carlo runs reproduce serial results exactly.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
  std::uint64_t s = master_seed ^ (0xD1B54A32D192ED03ull * (index + 1));
  return splitmix64(s);
}

// Small deterministic generator (SplitMix64 core, Box-Muller normals).
// Standard-library distributions are implementation-defined, which would
// break the byte-for-byte reproducibility contract of simulated datasets.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // +1 or -1 with equal probability.
  int sign() { return bernoulli(0.5) ? 1 : -1; }

  // Standard normal; Box-Muller with the second value of each pair cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log() finite
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace smartcrt
