#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tmdpt {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; stable across platforms, unlike std::hash.
constexpr std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stage tags keep seeds of independent random streams apart.
enum class SeedStage : std::uint64_t {
  PoolSelection = 1,
  ClipSelection = 2,
  Downsample = 3,
  Shuffle = 4,
  Augment = 5,
  Init = 6,
  Synthetic = 7,
  GradCheck = 8,
};

constexpr std::uint64_t derive_seed(std::uint64_t base, SeedStage stage, std::uint64_t source = 0,
                                    std::uint64_t epoch = 0) {
  std::uint64_t h = mix64(base);
  h = mix64(h ^ static_cast<std::uint64_t>(stage));
  h = mix64(h ^ source);
  h = mix64(h ^ epoch);
  return h;
}

}  // namespace tmdpt
