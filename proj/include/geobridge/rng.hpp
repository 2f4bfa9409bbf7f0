#pragma once

#include <cstdint>
#include <random>

namespace geobridge {

/// splitmix64 output function; used to decorrelate derived seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream from (seed, stream index). Parallel code
/// must draw all randomness for index range chunks from such streams so
/// results do not depend on thread count.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(mix64(mix64(seed) ^ mix64(stream + 0x51ed2701)));
}

}  // namespace geobridge
