#include "pi2vec/common.hpp"

#include <cstring>

#include <fmt/format.h>

namespace pi2vec {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t fnv1a64(std::span<const double> values, std::uint64_t hash) {
  for (double v : values) {
    char raw[sizeof(double)];
    std::memcpy(raw, &v, sizeof(double));
    hash = fnv1a64(std::string_view(raw, sizeof(double)), hash);
  }
  return hash;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view name) {
  return splitmix64(root ^ fnv1a64(name));
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  return splitmix64(splitmix64(root) + index);
}

std::string to_hex(std::uint64_t value) { return fmt::format("{:016x}", value); }

double uniform01(Rng& rng) {
  // 53 random mantissa bits; identical across standard libraries.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_index(Rng& rng, int n) {
  if (n <= 0) throw InputError("uniform_index: n must be positive");
  const auto bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = Rng::max() - Rng::max() % bound;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return static_cast<int>(draw % bound);
}

}  // namespace pi2vec
