#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clbf/bloom_filter.hpp"
#include "clbf/cascade.hpp"
#include "clbf/gbdt.hpp"
#include "clbf/samples.hpp"

namespace clbf {

/// One filter over every key at rate F, seeded like a depth-0 cascade.
BloomFilter build_classic(const SampleSet& keys, double target_fpr, std::uint64_t seed);

/// "BLOOM-V1" container around a single filter.
std::string serialize_classic(const BloomFilter& f);
BloomFilter deserialize_classic(std::string_view bytes);

/// Partitioned learned filter: the score of the first `depth` trees picks
/// one of K region filters.
class Plbf {
 public:
  /// Partition and region rates from validation scores; region filters
  /// sized by the routed build keys.
  static Plbf build(std::shared_ptr<const BoostedEnsemble> ensemble, std::size_t depth, const SampleSet& keys,
                    const SampleSet& val_keys, const SampleSet& val_nonkeys, double target_fpr, std::size_t regions,
                    std::size_t segments, std::uint64_t seed);
  /// Explicit partition and rates.
  static Plbf build_with(std::shared_ptr<const BoostedEnsemble> ensemble, std::size_t depth,
                         std::vector<double> boundaries, std::vector<double> fprs, const SampleSet& keys,
                         double target_fpr, std::uint64_t seed);

  bool contains(std::span<const double> x, const KeyDigest& d, QueryStats* stats = nullptr) const;
  bool contains(std::span<const double> x, std::string_view id, QueryStats* stats = nullptr) const {
    return contains(x, digest(id), stats);
  }

  std::size_t depth() const noexcept { return depth_; }
  std::size_t regions() const noexcept { return fprs_.size(); }
  double target_fpr() const noexcept { return target_fpr_; }
  const std::vector<double>& boundaries() const noexcept { return boundaries_; }
  const std::vector<double>& fprs() const noexcept { return fprs_; }
  /// Validation region fractions; empty for build_with.
  const std::vector<double>& key_fractions() const noexcept { return g_; }
  const std::vector<double>& nonkey_fractions() const noexcept { return h_; }
  const std::vector<BloomFilter>& filters() const noexcept { return filters_; }
  const BoostedEnsemble& ensemble() const noexcept { return *ensemble_; }
  std::size_t key_count() const noexcept { return key_count_; }

  /// sum_k h_k f_k over the validation fractions.
  double analytic_fpr() const;
  std::uint64_t model_bytes() const { return ensemble_->prefix_size_bytes(depth_); }
  std::uint64_t filter_bits() const;

  /// "PLBF-V1" container.
  std::string serialize() const;
  static Plbf deserialize(std::string_view bytes);

 private:
  std::shared_ptr<const BoostedEnsemble> ensemble_;
  std::size_t depth_ = 0;
  double target_fpr_ = 0.0;
  std::vector<double> boundaries_, fprs_, g_, h_;
  std::vector<BloomFilter> filters_;
  std::size_t key_count_ = 0;
  std::uint64_t seed_ = 0;
};

struct SandwichParams {
  double pre_fpr = 1.0;
  double threshold = 0.5;   // score >= threshold answers Found
  double backup_fpr = 1.0;  // for keys scored below the threshold
};

/// Pre-filter, model, backup filter.
class Sandwiched {
 public:
  /// Grid search over pre-filter rates p^0..p^(P-1) and thresholds at the
  /// top-alpha non-key quantiles (plus "never accept on score"); keeps the
  /// smallest analytic memory whose analytic FPR stays within F.
  static Sandwiched build(std::shared_ptr<const BoostedEnsemble> ensemble, std::size_t depth, const SampleSet& keys,
                          const SampleSet& val_keys, const SampleSet& val_nonkeys, double target_fpr, double p,
                          std::size_t grid_size, std::span<const double> alpha_grid, std::uint64_t seed);
  static Sandwiched build_with(std::shared_ptr<const BoostedEnsemble> ensemble, std::size_t depth,
                               SandwichParams params, const SampleSet& keys, double target_fpr, std::uint64_t seed);

  bool contains(std::span<const double> x, const KeyDigest& d, QueryStats* stats = nullptr) const;
  bool contains(std::span<const double> x, std::string_view id, QueryStats* stats = nullptr) const {
    return contains(x, digest(id), stats);
  }

  std::size_t depth() const noexcept { return depth_; }
  double target_fpr() const noexcept { return target_fpr_; }
  const SandwichParams& params() const noexcept { return params_; }
  const BloomFilter& pre_filter() const noexcept { return pre_; }
  const BloomFilter& backup_filter() const noexcept { return backup_; }
  const BoostedEnsemble& ensemble() const noexcept { return *ensemble_; }
  std::size_t key_count() const noexcept { return key_count_; }
  /// Analytic FPR and memory of the chosen grid point (validation data).
  double analytic_fpr() const noexcept { return analytic_fpr_; }
  double analytic_memory_bits() const noexcept { return analytic_bits_; }

  std::uint64_t model_bytes() const { return ensemble_->prefix_size_bytes(depth_); }
  std::uint64_t filter_bits() const { return pre_.size_bits() + backup_.size_bits(); }

  /// The equivalent cascade configuration: TBF_1 is the pre-filter, deeper
  /// trunks pass everything, and the final layer is {backup, pass}.
  CascadeConfig as_cascade() const;

  /// "SLBF-V1" container.
  std::string serialize() const;
  static Sandwiched deserialize(std::string_view bytes);

 private:
  std::shared_ptr<const BoostedEnsemble> ensemble_;
  std::size_t depth_ = 0;
  double target_fpr_ = 0.0;
  SandwichParams params_;
  BloomFilter pre_, backup_;
  std::size_t key_count_ = 0;
  std::uint64_t seed_ = 0;
  double analytic_fpr_ = 0.0, analytic_bits_ = 0.0;
};

/// Cascade configuration that reproduces a PLBF: every trunk and branch
/// passes everything and no score ever branches.
CascadeConfig plbf_as_cascade(const Plbf& p);

}  // namespace clbf
