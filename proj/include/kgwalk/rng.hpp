#pragma once

// Counter-based SplitMix64 generator.
//
// The n-th draw (n = 1, 2, ...) of a stream with key k is
//
//     mix64(k + n * 0x9E3779B97F4A7C15)
//
// where mix64 is the SplitMix64 finalizer. Because every draw is a pure
// function of (key, counter), the full generator state is two integers and
// can be checkpointed and resumed exactly, and any other language can
// reproduce a stream bit for bit.
//
// Stream splitting: a named child stream of a parent key k has key
//     mix64(k ^ fnv1a64(name))
// and starts at counter 0. All randomness in the toolkit derives from one
// top-level seed through named children ("split", "shaper.init",
// "shaper.order", "agent.init", "agent.order", "agent.rollout").

#include <cstdint>
#include <limits>
#include <string_view>

namespace kgwalk {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

class Rng {
 public:
  Rng() = default;
  explicit Rng(std::uint64_t key, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  Rng child(std::string_view name) const noexcept { return Rng(mix64(key_ ^ fnv1a64(name))); }

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGoldenGamma);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) by rejection; n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace kgwalk
