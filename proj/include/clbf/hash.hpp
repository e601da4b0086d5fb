#pragma once

#include <cstdint>
#include <string_view>

namespace clbf {

// SplitMix64 finalizer; a bijection on 64-bit values.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 128-bit digest of an item, computed once per query and shared by every
/// filter the query visits. Each filter derives its own probe sequence from
/// the digest and its seed.
struct KeyDigest {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
};

KeyDigest digest(std::string_view bytes) noexcept;

/// Two independent 64-bit hashes of (item, seed) for double hashing.
struct ProbeHashes {
  std::uint64_t h1;
  std::uint64_t h2;
};

inline ProbeHashes probe_hashes(const KeyDigest& d, std::uint64_t seed) noexcept {
  const std::uint64_t a = mix64(d.lo ^ seed);
  const std::uint64_t b = mix64(d.hi ^ mix64(seed ^ 0x6a09e667f3bcc909ULL));
  return {mix64(a ^ (b >> 7)), mix64(b + a) | 1ULL};
}

}  // namespace clbf
