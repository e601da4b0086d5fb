#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "clbf/binary_io.hpp"
#include "clbf/hash.hpp"

namespace clbf {

/// log2(e): bits per key per halving of the false-positive rate.
inline constexpr double kBloomSizeConstant = 1.4426950408889634;

/// Smallest false-positive rate a filter will be sized for.
inline constexpr double kMinFpr = 0x1p-64;

/// ceil(log2(e) * n * log2(1/eps)); 0 when eps == 1 or n == 0.
std::uint64_t theoretical_size_bits(std::uint64_t n, double eps);

/// Classical Bloom filter with Kirsch-Mitzenmacher double hashing.
///
/// A filter configured with eps == 1 stores nothing and answers Found for
/// every item. A filter with eps < 1 and zero capacity also stores nothing,
/// but answers NotFound: no key can ever have been inserted.
class BloomFilter {
 public:
  BloomFilter() = default;
  BloomFilter(std::uint64_t capacity, double eps, std::uint64_t seed);

  void insert(const KeyDigest& d);
  void insert(std::string_view item) { insert(digest(item)); }

  bool contains(const KeyDigest& d) const;
  bool contains(std::string_view item) const { return contains(digest(item)); }

  std::uint64_t size_bits() const noexcept { return num_bits_; }
  std::uint32_t num_hashes() const noexcept { return num_hashes_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t capacity() const noexcept { return capacity_; }
  double target_fpr() const noexcept { return target_fpr_; }
  bool always_found() const noexcept { return target_fpr_ >= 1.0; }

  /// Fraction of set bits; 0 for zero-size filters.
  double fill_ratio() const;

  void serialize(io::Writer& w) const;
  static BloomFilter deserialize(io::Reader& r);

  friend bool operator==(const BloomFilter&, const BloomFilter&) = default;

 private:
  std::uint64_t num_bits_ = 0;
  std::uint32_t num_hashes_ = 0;
  std::uint64_t seed_ = 0;
  std::uint64_t capacity_ = 0;
  double target_fpr_ = 1.0;
  std::vector<std::uint64_t> words_;
};

}  // namespace clbf
