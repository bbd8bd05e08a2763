#pragma once

#include <cstdint>
#include <span>

#include "templar/machine.hpp"

namespace templar {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// SplitMix64. Satisfies UniformRandomBitGenerator.
class SplitMix64 {
public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  constexpr result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

private:
  std::uint64_t state_;
};

/// Deterministic draw sequence keyed by (campaign seed, program index, hole address).
/// Equal keys give equal sequences; bounded draws are unbiased and independent of
/// the standard library's distribution implementations.
class ChoiceStream {
public:
  ChoiceStream(std::uint64_t seed, std::uint64_t program_index, HoleAddress address)
      : rng_(derive(seed, program_index, address.value)) {}

  static constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t program_index,
                                        std::uint64_t address) {
    std::uint64_t k = mix64(seed + 0x243f6a8885a308d3ULL);
    k = mix64(k ^ (program_index * 0x9e3779b97f4a7c15ULL + 0x13198a2e03707344ULL));
    k = mix64(k ^ (address * 0xc2b2ae3d27d4eb4fULL + 0xa4093822299f31d0ULL));
    return k;
  }

  std::uint64_t next() { return rng_(); }

  /// Uniform in [0, n), n > 0 (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t n) {
    __extension__ using u128 = unsigned __int128;
    u128 m = static_cast<u128>(rng_()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<u128>(rng_()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform in [lo, hi], lo <= hi.
  std::int64_t in_range(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
    if (span == ~std::uint64_t{0}) return static_cast<std::int64_t>(rng_());
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + below(span + 1));
  }

  template <class T>
  const T& pick(std::span<const T> items) {
    return items[below(items.size())];
  }

private:
  SplitMix64 rng_;
};

} // namespace templar
