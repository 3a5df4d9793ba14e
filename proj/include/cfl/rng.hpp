#pragma once

#include <cstdint>
#include <limits>

namespace cfl {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stateless hash of (seed, stream, counter); the basis of reproducible
// parallel sampling.
inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter);
}

inline double to_unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

inline std::uint64_t stream_id(std::uint64_t triple, std::uint64_t pair) { return (triple << 2) | pair; }

// UniformRandomBitGenerator over counter_hash, for use with <random>
// distributions.
class CounterEngine {
 public:
  using result_type = std::uint64_t;
  CounterEngine(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return counter_hash(seed_, stream_, counter_++); }

 private:
  std::uint64_t seed_, stream_, counter_ = 0;
};

}  // namespace cfl
