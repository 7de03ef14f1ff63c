#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace kcm {

/// What a random stream is used for; part of the stream key so that the
/// clocks and the two initial configurations of a replica never share bits.
enum class StreamPurpose : std::uint64_t {
  Clock = 1,
  InitialA = 2,
  InitialB = 3,
  Auxiliary = 4,
};

namespace detail {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Key of an independent stream, derived from (master seed, replica, site,
/// purpose).
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replica, std::uint64_t site,
                                   StreamPurpose purpose) {
  std::uint64_t h = detail::mix64(seed + detail::kGolden);
  h = detail::mix64(h ^ (replica + 0x632be59bd9b4e019ull));
  h = detail::mix64(h ^ (site + 0x8cb92ba72f3d8dd7ull));
  h = detail::mix64(h ^ (static_cast<std::uint64_t>(purpose) * 0xd6e8feb86659fd93ull));
  return h;
}

/// Counter-based generator: the i-th output is a pure function of (key, i),
/// the SplitMix64 output function applied to key + i * golden.
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::uint64_t seed, std::uint64_t replica, std::uint64_t site, StreamPurpose purpose)
      : key_(stream_key(seed, replica, site, purpose)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() { return detail::mix64(key_ + (++counter_) * detail::kGolden); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Exponential with rate 1, strictly positive.
  double exponential() {
    double e = 0.0;
    while (e == 0.0) e = -std::log1p(-uniform());
    return e;
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace kcm
