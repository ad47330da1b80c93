#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace mvrecon {

// 64-bit FNV-1a; `state` chains several buffers into one digest.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state = 14695981039346656037ULL) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 1099511628211ULL;
  }
  return state;
}

// splitmix64 finalizer; used to derive independent seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::string_view tag) { return mix_seed(a, fnv1a(tag)); }

std::string hex64(std::uint64_t value);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

// Runs fn(0..n-1) on up to `threads` workers (0 = hardware concurrency).
// Rethrows the exception of the lowest failing index.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace mvrecon
