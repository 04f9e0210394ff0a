#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace dclab {

// Deterministic RNG wrapper. std::mt19937_64 output is fully specified by the
// standard; the distribution helpers below are hand-rolled because the
// standard library distributions are implementation-defined and would break
// byte-exact reproducibility across toolchains.
class Rng {
public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t raw() { return engine_(); }

  // uniform in [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

  // uniform in (0, 1], safe for log()
  double uniform_open() { return static_cast<double>((raw() >> 11) + 1) * 0x1.0p-53; }

  // uniform integer in [0, n) via 128-bit multiply (Lemire reduction, no rejection)
  uint32_t below(uint32_t n) {
    return static_cast<uint32_t>((static_cast<__uint128_t>(raw()) * n) >> 64);
  }

  // index into non-negative weights, probability proportional to weight
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double r = uniform() * total;
    double acc = 0.0;
    int last = 0;
    for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
      if (weights[i] <= 0.0) continue;
      acc += weights[i];
      last = i;
      if (r < acc) return i;
    }
    return last;  // guards the r == total rounding edge
  }

  // standard normal via Box-Muller, spare cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform_open();
    double u2 = uniform();
    double mag = std::sqrt(-2.0 * std::log(u1));
    double ang = 6.283185307179586476925286766559 * u2;
    spare_ = mag * std::sin(ang);
    has_spare_ = true;
    return mag * std::cos(ang);
  }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Stage-seed derivation: one master seed fans out to independent per-stage
// streams. The mapping is part of the reproducibility contract (recorded in
// run manifests).
inline uint64_t split_seed(uint64_t master, uint64_t stream) {
  return splitmix64(splitmix64(master) ^ (0x9E3779B97F4A7C15ull * (stream + 1)));
}

}  // namespace dclab
