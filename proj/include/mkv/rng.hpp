#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace mkv {

/// Identifies one independent noise stream. Stored verbatim, so distinct
/// index tuples are distinct keys.
struct StreamKey {
  std::uint64_t master = 0;
  std::uint32_t replica = 0;
  std::uint32_t particle = 0;
  std::uint32_t iteration = 0;

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
  friend auto operator<=>(const StreamKey&, const StreamKey&) = default;
};

/// Splitting scheme: every index must be < 2^32, otherwise IndexOverflow.
StreamKey derive_seed(std::uint64_t master, std::uint64_t replica,
                      std::uint64_t particle, std::uint64_t iteration);

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ (Blackman & Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(const StreamKey& key) noexcept;
  explicit Xoshiro256(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  void seed_from(std::uint64_t sm) noexcept;

  std::array<std::uint64_t, 4> s_{};
};

}  // namespace mkv
