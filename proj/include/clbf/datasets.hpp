#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "clbf/hash.hpp"
#include "clbf/samples.hpp"

namespace clbf {

/// SplitMix64 used as a counter-based generator: the i-th output is
/// mix64(seed + i * 0x9e3779b97f4a7c15), so any position of the stream can
/// be reproduced from (seed, i) alone.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64() noexcept { return mix64(seed_ + counter_++ * 0x9e3779b97f4a7c15ULL); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1p-53; }

  /// Standard normal via Box-Muller; both variates of a pair are used.
  double normal() noexcept;

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct LabeledDataset {
  SampleSet keys;
  SampleSet nonkeys;
  std::uint64_t seed = 0;

  std::size_t dim() const noexcept { return keys.dim(); }
};

/// Throws if a key identity also appears among the non-keys.
void check_disjoint(const LabeledDataset& ds);

/// Every feature i.i.d. Uniform[0,1); keys and non-keys share the distribution.
LabeledDataset gen_random(std::size_t n_keys, std::size_t n_nonkeys, std::size_t dim, std::uint64_t seed);

/// Keys ~ N(0, I), non-keys ~ N(delta * 1, I).
LabeledDataset gen_separation(double delta, std::size_t n_keys, std::size_t n_nonkeys, std::size_t dim,
                              std::uint64_t seed);

/// Sizes of `parts` near-equal groups summing to `total`; the first
/// total % parts groups get one extra element.
std::vector<std::size_t> equal_split_counts(std::size_t total, std::size_t parts);

/// c key centers and c non-key centers drawn from Uniform[-10,10]^dim;
/// samples ~ N(center, I) split equally over clusters, remainder to the
/// earliest clusters.
LabeledDataset gen_clusters(std::size_t clusters, std::size_t n_keys, std::size_t n_nonkeys, std::size_t dim,
                            std::uint64_t seed);

/// CSV with a header row; every column except `label_column` is a numeric
/// feature. Rows whose label equals `key_label` are keys.
LabeledDataset parse_csv(std::string_view text, const std::string& label_column = "label",
                         const std::string& key_label = "1");
LabeledDataset load_csv(const std::string& path, const std::string& label_column = "label",
                        const std::string& key_label = "1");

/// Header `f0..f{dim-1},label`; keys labelled 1, written first. Features
/// are printed with 17 significant digits so they reload bit-exactly.
std::string to_csv(const LabeledDataset& ds);
void write_csv(const LabeledDataset& ds, const std::string& path);

enum class KeySplitPolicy {
  kAllKeysTrainAndVal,  // every key appears in train and validation, never in test
  kSplitKeys,           // keys split by the same fractions as non-keys
};

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

/// Shuffles non-keys (and keys under kSplitKeys) and cuts them by the given
/// fractions, rounding train and validation counts to nearest.
DatasetSplit split(const LabeledDataset& ds, double train_frac, double val_frac, double test_frac,
                   std::uint64_t seed, KeySplitPolicy policy = KeySplitPolicy::kAllKeysTrainAndVal);

}  // namespace clbf
