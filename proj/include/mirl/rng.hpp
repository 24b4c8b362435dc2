#ifndef MIRL_RNG_HPP_
#define MIRL_RNG_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace mirl {

// SplitMix64 step (Steele, Lea, Flood reference constants).
std::uint64_t splitmix64(std::uint64_t& state);

// xoshiro256** 1.0. Derived samplers are implemented here, not with <random>
// distributions, and give the same streams on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via Box-Muller; the second variate is cached.
  double normal();
  // Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Purpose tags for stream derivation. Values are fixed; changing one changes
// every recorded run.
enum class Stream : std::uint64_t {
  kDemos = 0x64656d6f73000001ULL,
  kPolicyInit = 0x706f6c6963790002ULL,
  kRewardInit = 0x7265776172640003ULL,
  kRollout = 0x726f6c6c6f750004ULL,
  kMinibatch = 0x6d696e6962610005ULL,
  kDemoBatch = 0x64656d6f62610006ULL,
  kEvaluation = 0x6576616c75610007ULL,
  kAuxInit = 0x6175786e65740008ULL,
};

// stream seed = seed XOR tag + index.
Rng derive_stream(std::uint64_t seed, Stream tag, std::uint64_t index = 0);

}  // namespace mirl

#endif  // MIRL_RNG_HPP_
