#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace rfcov {

/// SplitMix64 output finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// FNV-1a hash of a stream label ("tree", "synthetic", ...).
constexpr std::uint64_t label(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

namespace detail {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t absorb(std::uint64_t key, std::uint64_t part) noexcept {
  return mix64(key ^ mix64(part + kGolden));
}
constexpr std::uint64_t absorb(std::uint64_t key, std::string_view part) noexcept {
  return absorb(key, label(part));
}
}  // namespace detail

/// Derives the key of a child stream from a parent key and a path of labels
/// and indices. Keys are pure functions of their path, so any stream can be
/// reconstructed without replaying its siblings.
template <class... Parts>
constexpr std::uint64_t derive_key(std::uint64_t seed, Parts... parts) noexcept {
  std::uint64_t key = mix64(seed + detail::kGolden);
  ((key = detail::absorb(key, parts)), ...);
  return key;
}

/// Counter-based generator: output k is mix64(key + k * golden). Satisfies
/// UniformRandomBitGenerator so it can drive the <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key) noexcept : state_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    state_ += detail::kGolden;
    return mix64(state_);
  }

  /// Uniform double in [0, 1).
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound), Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound) noexcept {
    __extension__ using u128 = unsigned __int128;
    u128 m = static_cast<u128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<u128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  std::uint64_t state_;
};

}  // namespace rfcov
