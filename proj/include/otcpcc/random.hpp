#pragma once

// Seeding conventions. All randomness in the library comes from
// std::mt19937_64 engines whose seeds are derived by hashing a base seed
// together with the identifiers of the stream (method name, size, trial,
// projection index), so independent streams never share state and adding
// a consumer does not perturb the others.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace otcpcc {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline constexpr std::uint64_t derive_seed(std::uint64_t base,
                                           std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  return Rng(derive_seed(base, parts));
}

}  // namespace otcpcc
