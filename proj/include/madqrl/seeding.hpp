#pragma once

#include <cstdint>
#include <initializer_list>

namespace madqrl {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive combination of seed components into one stream seed.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

// Each seed stream gets its own tag so streams never share seeds.
enum class SeedStream : std::uint64_t {
  Init = 1,
  RolloutEnv = 2,
  RolloutActions = 3,
  Shuffle = 4,
  Eval = 5,
};

}  // namespace madqrl
