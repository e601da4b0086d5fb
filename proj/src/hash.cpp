#include "clbf/hash.hpp"

#include <cstring>

namespace clbf {

namespace {

inline std::uint64_t load64(const char* p) noexcept {
  std::uint64_t v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline std::uint64_t mulfold(std::uint64_t a, std::uint64_t b) noexcept {
  const unsigned __int128 r = static_cast<unsigned __int128>(a) * b;
  return static_cast<std::uint64_t>(r) ^ static_cast<std::uint64_t>(r >> 64);
}

constexpr std::uint64_t kP0 = 0xa0761d6478bd642fULL;
constexpr std::uint64_t kP1 = 0xe7037ed1a0b428dbULL;
constexpr std::uint64_t kP2 = 0x8ebc6af09c88c6e3ULL;

}  // namespace

KeyDigest digest(std::string_view bytes) noexcept {
  const char* p = bytes.data();
  std::size_t n = bytes.size();
  std::uint64_t a = kP0 ^ n;
  std::uint64_t b = kP1 + n;
  while (n >= 16) {
    a = mulfold(a ^ load64(p), kP1 ^ b);
    b = mulfold(b ^ load64(p + 8), kP2 ^ a);
    p += 16;
    n -= 16;
  }
  std::uint64_t tail0 = 0;
  std::uint64_t tail1 = 0;
  if (n >= 8) {
    tail0 = load64(p);
    std::memcpy(&tail1, p + 8, n - 8);
  } else {
    std::memcpy(&tail0, p, n);
  }
  a = mulfold(a ^ tail0, kP1 ^ b);
  b = mulfold(b ^ tail1, kP2 ^ a);
  return {mix64(a ^ mix64(b)), mix64(b + kP0 * a)};
}

}  // namespace clbf
