#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace ndtt {

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t mix64(uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// mt19937_64 core (bit-identical across platforms) with hand-rolled
// distributions; the std:: distributions are implementation-defined and would
// break byte-identical reproducibility.
class Rng {
public:
  explicit Rng(uint64_t seed) : seed_(seed), gen_(mix64(seed)) {}

  uint64_t seed() const { return seed_; }
  uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  double normal() {
    // Box-Muller; one draw per call so consumption is position-independent
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // unbiased integer in [0, n)
  uint64_t below(uint64_t n) {
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t r = gen_();
    while (r >= limit) r = gen_();
    return r % n;
  }

  // derive an independent child stream; does not disturb this stream
  Rng child(const std::string& tag) const { return Rng(mix64(seed_ ^ fnv1a64(tag))); }
  Rng child(uint64_t index) const { return Rng(mix64(seed_ ^ mix64(index + 0x51ed2701))); }

private:
  uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace ndtt
