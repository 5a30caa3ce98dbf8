#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace modfollow {

using Engine = std::mt19937_64;

// Splittable seeding: every independent stream is keyed by (master, kind, id)
// and mixed through the SplitMix64 finalizer, so stream contents never depend
// on the order in which streams are consumed.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class StreamKind : std::uint64_t {
  color_block = 1,
  group = 2,
  scene = 3,
  mock_instance = 4,
  bootstrap = 5,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, StreamKind kind,
                                    std::uint64_t id) noexcept {
  return splitmix64(splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(kind))) + id);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline Engine make_engine(std::uint64_t seed) { return Engine{seed}; }

}  // namespace modfollow
