#include "clbf/bloom_filter.hpp"

#include <bit>
#include <cmath>
#include <numeric>

#include "clbf/error.hpp"

namespace clbf {

namespace {

void check_fpr(double eps) {
  if (!(eps > 0.0) || eps > 1.0) fail(ErrorKind::kInvalidParameter, "false-positive rate must lie in (0, 1]");
}

inline std::uint64_t reduce(std::uint64_t h, std::uint64_t m) noexcept { return h % m; }

}  // namespace

std::uint64_t theoretical_size_bits(std::uint64_t n, double eps) {
  check_fpr(eps);
  if (eps == 1.0 || n == 0) return 0;
  const double e = std::max(eps, kMinFpr);
  return static_cast<std::uint64_t>(std::ceil(kBloomSizeConstant * static_cast<double>(n) * std::log2(1.0 / e)));
}

BloomFilter::BloomFilter(std::uint64_t capacity, double eps, std::uint64_t seed)
    : num_bits_(theoretical_size_bits(capacity, eps)), seed_(seed), capacity_(capacity), target_fpr_(eps) {
  if (eps < 1.0) {
    num_hashes_ = static_cast<std::uint32_t>(std::ceil(std::log2(1.0 / std::max(eps, kMinFpr))));
    num_hashes_ = std::max<std::uint32_t>(num_hashes_, 1);
  }
  words_.assign((num_bits_ + 63) / 64, 0);
}

void BloomFilter::insert(const KeyDigest& d) {
  if (num_bits_ == 0) return;
  auto [h1, h2] = probe_hashes(d, seed_);
  for (std::uint32_t i = 0; i < num_hashes_; ++i) {
    const std::uint64_t pos = reduce(h1, num_bits_);
    words_[pos >> 6] |= 1ULL << (pos & 63);
    h1 += h2;
  }
}

bool BloomFilter::contains(const KeyDigest& d) const {
  if (always_found()) return true;
  if (num_bits_ == 0) return false;
  auto [h1, h2] = probe_hashes(d, seed_);
  for (std::uint32_t i = 0; i < num_hashes_; ++i) {
    const std::uint64_t pos = reduce(h1, num_bits_);
    if ((words_[pos >> 6] & (1ULL << (pos & 63))) == 0) return false;
    h1 += h2;
  }
  return true;
}

double BloomFilter::fill_ratio() const {
  if (num_bits_ == 0) return 0.0;
  std::uint64_t set = 0;
  for (auto w : words_) set += static_cast<std::uint64_t>(std::popcount(w));
  return static_cast<double>(set) / static_cast<double>(num_bits_);
}

void BloomFilter::serialize(io::Writer& w) const {
  w.put<std::uint64_t>(num_bits_);
  w.put<std::uint32_t>(num_hashes_);
  w.put<std::uint64_t>(seed_);
  w.put<std::uint64_t>(capacity_);
  w.put<double>(target_fpr_);
  const std::size_t nbytes = (num_bits_ + 7) / 8;
  std::string payload(nbytes, '\0');
  for (std::size_t i = 0; i < nbytes; ++i) {
    payload[i] = static_cast<char>((words_[i / 8] >> (8 * (i % 8))) & 0xff);
  }
  w.put_bytes(payload);
}

BloomFilter BloomFilter::deserialize(io::Reader& r) {
  BloomFilter f;
  f.num_bits_ = r.get<std::uint64_t>();
  f.num_hashes_ = r.get<std::uint32_t>();
  f.seed_ = r.get<std::uint64_t>();
  f.capacity_ = r.get<std::uint64_t>();
  f.target_fpr_ = r.get<double>();
  check_fpr(f.target_fpr_);
  if (f.num_bits_ != theoretical_size_bits(f.capacity_, f.target_fpr_)) {
    fail(ErrorKind::kFormat, "bloom filter size does not match its capacity and rate");
  }
  const std::size_t nbytes = (f.num_bits_ + 7) / 8;
  const auto payload = r.get_bytes(nbytes);
  f.words_.assign((f.num_bits_ + 63) / 64, 0);
  for (std::size_t i = 0; i < nbytes; ++i) {
    f.words_[i / 8] |= static_cast<std::uint64_t>(static_cast<unsigned char>(payload[i])) << (8 * (i % 8));
  }
  return f;
}

}  // namespace clbf
