#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sbn {

// Counter-free splitmix64 stream. Named "splitmix64" in checkpoint headers;
// child streams are derived from the root seed and a label, so the draw
// order of one component never shifts another.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64";

  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; the second value is discarded so the stream state is a
  // single counter.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  Rng split(std::string_view label) const {
    return Rng(mix(seed_ ^ fnv1a(label)));
  }

  std::uint64_t state() const { return state_; }
  std::uint64_t seed() const { return seed_; }
  void restore(std::uint64_t seed, std::uint64_t state) {
    seed_ = seed;
    state_ = state;
  }

 private:
  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace sbn
