#pragma once

#include <cstdint>

namespace lebspec {

// splitmix64; used for seeding and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// xoshiro256** (Blackman/Vigna). Integer-only state transitions, so streams
// are bit-reproducible across platforms and builds.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  int sign() { return (next() >> 63) ? -1 : 1; }

  // Index in [0, n) via 128-bit multiply (bias < 2^-64, deterministic).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t state_[4];
};

// Every stochastic operation draws its generator from (root seed, stream tag,
// index) so that a single root seed reproduces a whole run.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  std::uint64_t s = root;
  std::uint64_t h = splitmix64(s);
  s = h ^ (stream + 0x9E3779B97F4A7C15ULL);
  h = splitmix64(s);
  s = h ^ (index + 0xBF58476D1CE4E5B9ULL);
  return splitmix64(s);
}

// Stream tags (arbitrary distinct constants).
namespace streams {
inline constexpr std::uint64_t kBernoulliLabels = 1;
inline constexpr std::uint64_t kIndependentSubset = 2;
inline constexpr std::uint64_t kSpreadInduce = 3;
inline constexpr std::uint64_t kAddFunction = 4;
inline constexpr std::uint64_t kMeilijson = 5;
inline constexpr std::uint64_t kTestData = 6;
}  // namespace streams

}  // namespace lebspec
