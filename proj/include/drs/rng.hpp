#ifndef DRS_RNG_HPP
#define DRS_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace drs {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Expands a run seed into an independent named sub-stream. Adding a new
/// stream name never perturbs the sequence of an existing one.
inline Rng make_stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
  std::uint64_t s = splitmix64(seed ^ splitmix64(fnv1a(name)));
  s = splitmix64(s ^ splitmix64(index + 0x5851f42d4c957f2dULL));
  return Rng(s);
}

}  // namespace drs

#endif  // DRS_RNG_HPP
