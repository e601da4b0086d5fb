#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clbf/bloom_filter.hpp"
#include "clbf/cost_model.hpp"
#include "clbf/gbdt.hpp"
#include "clbf/samples.hpp"

namespace clbf {

/// Shape and rates of a cascade. Vectors are 0-based: trunk_fprs[d] is the
/// rate of TBF_{d+1}. depth == 0 means a single classical filter at
/// target_fpr and every vector empty.
///
/// A rate of 0 marks a terminal that no validation key reaches; its filter
/// is built at the minimum rate for whatever keys do arrive.
struct CascadeConfig {
  std::size_t depth = 0;
  std::vector<double> branch_thresholds;  // depth - 1
  std::vector<double> trunk_fprs;         // depth
  std::vector<double> branch_fprs;        // depth - 1
  std::vector<double> final_boundaries;   // K + 1, from 0 to 1
  std::vector<double> final_fprs;         // K
  double target_fpr = 0.01;
  double lambda = 1.0;

  std::size_t regions() const noexcept { return final_fprs.size(); }
  void validate() const;

  void serialize(io::Writer& w) const;
  static CascadeConfig deserialize(io::Reader& r);

  friend bool operator==(const CascadeConfig&, const CascadeConfig&) = default;
};

/// 0-based final region of score s: the k with t_k <= s < t_{k+1}; s == 1
/// maps to the last region.
std::size_t final_region(std::span<const double> boundaries, double s);

enum class FilterRole : std::uint8_t { kTrunk = 1, kBranch = 2, kFinal = 3, kClassic = 4 };

/// Seed of the filter with the given role and index. Structures that place
/// a filter in the same role share its hash seed.
std::uint64_t filter_seed(std::uint64_t run_seed, FilterRole role, std::size_t index);

/// Where a key's insertion path ends.
struct KeyRoute {
  std::size_t trunks = 0;  // TBF_1..TBF_trunks are on the path
  bool branched = false;   // terminal is BBF_trunks, else FBF_{terminal+1}
  std::size_t terminal = 0;
};

struct QueryStats {
  std::size_t model_evaluations = 0;
};

/// The built cascade. Immutable after build() apart from insert_key().
class Clbf {
 public:
  /// Routes every key, sizes each filter from the exact routed count, then
  /// inserts.
  static Clbf build(CascadeConfig config, std::shared_ptr<const BoostedEnsemble> ensemble, const SampleSet& keys,
                    std::uint64_t seed);

  KeyRoute route(std::span<const double> x) const;

  /// Inserts into every filter on the key's path. Filters keep the capacity
  /// they were built with.
  void insert_key(std::span<const double> x, std::string_view id);

  bool contains(std::span<const double> x, std::string_view id, QueryStats* stats = nullptr) const {
    return contains(x, digest(id), stats);
  }
  bool contains(std::span<const double> x, const KeyDigest& d, QueryStats* stats = nullptr) const;

  const CascadeConfig& config() const noexcept { return config_; }
  const BoostedEnsemble& ensemble() const noexcept { return *ensemble_; }
  std::shared_ptr<const BoostedEnsemble> ensemble_ptr() const noexcept { return ensemble_; }
  std::size_t key_count() const noexcept { return key_count_; }
  std::uint64_t seed() const noexcept { return seed_; }

  const std::vector<BloomFilter>& trunk_filters() const noexcept { return trunks_; }
  const std::vector<BloomFilter>& branch_filters() const noexcept { return branches_; }
  const std::vector<BloomFilter>& final_filters() const noexcept { return finals_; }
  /// The single filter of a depth-0 cascade.
  const BloomFilter& classic_filter() const noexcept { return classic_; }

  std::uint64_t model_bytes() const { return ensemble_->prefix_size_bytes(config_.depth); }
  std::uint64_t filter_bits() const;

  /// Profile the configuration was optimized against, when known.
  const std::optional<DepthProfile>& profile() const noexcept { return profile_; }
  void set_profile(DepthProfile p) { profile_ = std::move(p); }

  /// "CLBF-V1" container: config, the first `depth` trees, every filter and
  /// the optional profile.
  std::string serialize() const;
  static Clbf deserialize(std::string_view bytes);

 private:
  CascadeConfig config_;
  std::shared_ptr<const BoostedEnsemble> ensemble_;
  std::vector<BloomFilter> trunks_, branches_, finals_;
  BloomFilter classic_;
  std::size_t key_count_ = 0;
  std::uint64_t seed_ = 0;
  std::optional<DepthProfile> profile_;
};

/// Memory in bits: model bits plus analytic sizes of every filter,
/// with key fractions taken from the profile. n is the stored key count.
double analytic_memory_bits(const CascadeConfig& c, const ModelCosts& costs, const DepthProfile& profile,
                            std::size_t n);

/// Expected model-inference time per non-key query:
/// sum_i Time(ML_i) h_t[i] prod_{j<=i} f_t[j].
double analytic_reject_time_ns(const CascadeConfig& c, const ModelCosts& costs, const DepthProfile& profile);

/// Expected number of model evaluations per non-key query (the reject-time
/// routing factor without the per-model time).
double expected_model_evaluations(const CascadeConfig& c, const DepthProfile& profile);

/// Expected false-positive rate of the configuration over the profile's
/// non-key distribution; target_fpr for depth 0.
double analytic_fpr(const CascadeConfig& c, const DepthProfile& profile);

}  // namespace clbf
