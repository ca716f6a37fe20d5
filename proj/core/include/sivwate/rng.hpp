#pragma once

#include <cstdint>
#include <random>

namespace sivwate {

using Engine = std::mt19937_64;

// splitmix64 finalizer; decorrelates nearby seeds.
constexpr std::uint64_t mix64(std::uint64_t v) noexcept {
  v += 0x9E3779B97F4A7C15ULL;
  v = (v ^ (v >> 30)) * 0xBF58476D1CE4E5B9ULL;
  v = (v ^ (v >> 27)) * 0x94D049BB133111EBULL;
  return v ^ (v >> 31);
}

// Seed for an independent stream (e.g. bootstrap replicate `stream`).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) ^ mix64(stream + 0x632BE59BD9B4E019ULL));
}

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
  return Engine(derive_seed(seed, stream));
}

// The standard distributions are implementation-defined; these are not, so
// draws are identical across standard libraries.
inline double uniform01(Engine& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& gen, double lo, double hi) {
  return lo + (hi - lo) * uniform01(gen);
}

// Unbiased integer in [0, n) (Lemire's multiply-shift with rejection).
inline std::uint64_t uniform_index(Engine& gen, std::uint64_t n) {
  __extension__ typedef unsigned __int128 u128;
  std::uint64_t x = gen();
  u128 m = static_cast<u128>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = gen();
      m = static_cast<u128>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace sivwate
