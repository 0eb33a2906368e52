#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace mdaforge {

/// SplitMix64 finalizer. Used to derive independent sub-seeds from one seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for a sub-component, fixed offset from the run seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t offset) {
  return splitmix64(base ^ splitmix64(offset));
}

// Well-known offsets so every component draws from its own stream.
namespace seed_offset {
inline constexpr std::uint64_t kFeatureEncoder = 11;
inline constexpr std::uint64_t kDomainEncoder = 12;
inline constexpr std::uint64_t kDiscriminator = 13;
inline constexpr std::uint64_t kClassifier = 14;
inline constexpr std::uint64_t kBatches = 21;
inline constexpr std::uint64_t kSplit = 31;
}  // namespace seed_offset

/// Portable random source. The standard distributions are implementation
/// defined, so uniform/integer/shuffle draws are done by hand on top of the
/// fully specified mt19937_64 stream. Same seed, same numbers, any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mdaforge
