#ifndef NASVOX_SEED_HPP
#define NASVOX_SEED_HPP

#include <cstdint>

namespace nasvox {

/// Independent child seed for a numbered stream (splitmix64 finalizer).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace nasvox

#endif  // NASVOX_SEED_HPP
