#include "mkv/rng.hpp"

#include <string>

#include "mkv/errors.hpp"

namespace mkv {

StreamKey derive_seed(std::uint64_t master, std::uint64_t replica,
                      std::uint64_t particle, std::uint64_t iteration) {
  constexpr std::uint64_t limit = std::uint64_t{1} << 32;
  if (replica >= limit || particle >= limit || iteration >= limit) {
    throw IndexOverflow("stream indices must be < 2^32 (replica=" + std::to_string(replica) +
                        ", particle=" + std::to_string(particle) +
                        ", iteration=" + std::to_string(iteration) + ")");
  }
  return StreamKey{master, static_cast<std::uint32_t>(replica),
                   static_cast<std::uint32_t>(particle),
                   static_cast<std::uint32_t>(iteration)};
}

Xoshiro256::Xoshiro256(const StreamKey& key) noexcept {
  // Fold the key words through splitmix so nearby indices land far apart.
  std::uint64_t h = key.master;
  std::uint64_t acc = splitmix64(h);
  h ^= (std::uint64_t{key.replica} << 32) | key.particle;
  acc ^= splitmix64(h);
  h ^= std::uint64_t{key.iteration} * 0xd6e8feb86659fd93ULL;
  acc = acc * 0x9e3779b97f4a7c15ULL ^ splitmix64(h);
  seed_from(acc);
}

Xoshiro256::Xoshiro256(std::uint64_t seed) noexcept { seed_from(seed); }

void Xoshiro256::seed_from(std::uint64_t sm) noexcept {
  for (auto& word : s_) word = splitmix64(sm);
}

}  // namespace mkv
