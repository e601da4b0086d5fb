#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clbf/cascade.hpp"
#include "clbf/cost_model.hpp"
#include "clbf/gbdt.hpp"
#include "clbf/samples.hpp"

namespace clbf {

std::vector<double> default_alpha_grid();

struct OptimizerParams {
  double target_fpr = 0.01;
  double lambda = 1.0;
  double p = 0.5;
  std::size_t grid_size = 20;  // P: trunk rates p^0 .. p^(P-1)
  std::size_t regions = 5;     // K
  std::size_t segments = 100;  // histogram bins for the final partition
  std::vector<double> alpha_grid = default_alpha_grid();
  double memory_scale_bits = 0.0;  // M_BF
  double reject_scale_ns = 0.0;    // R_BF; unused when lambda == 1
  std::size_t num_keys = 0;        // n in the filter-size terms

  void validate() const;

  /// Budget handed to f_tilde. Slightly below target_fpr so that the
  /// floating-point sum in analytic_fpr cannot land above it.
  double budget() const noexcept { return target_fpr * (1.0 - 1e-9); }
  double memory_weight() const noexcept { return lambda / memory_scale_bits; }
  double time_weight() const noexcept { return lambda < 1.0 ? (1.0 - lambda) / reject_scale_ns : 0.0; }
};

/// Prefix scores of a sample set for depths 1..max_depth, depth-major.
class PrefixScores {
 public:
  PrefixScores() = default;
  PrefixScores(const BoostedEnsemble& e, const SampleSet& samples, std::size_t max_depth);

  std::size_t max_depth() const noexcept { return depth_; }
  std::size_t size() const noexcept { return count_; }
  /// Scores after `depth` trees (1-based).
  std::span<const double> at(std::size_t depth) const noexcept {
    return {values_.data() + (depth - 1) * count_, count_};
  }

 private:
  std::size_t depth_ = 0, count_ = 0;
  std::vector<double> values_;
};

/// Threshold with a fraction alpha of the scores at or above it: the
/// floor(alpha * n)-th largest score, or just above the maximum when that
/// count is zero.
double threshold_for_alpha(std::span<const double> scores, double alpha);

/// One threshold per depth 1..max_depth-1 from all validation non-key
/// scores at that depth.
std::vector<double> candidate_thresholds(const PrefixScores& nonkeys, double alpha);

/// Boundaries t_0 = 0 < ... < t_K = 1 on bin edges of `segments`
/// equal-width bins, maximizing sum_k g_k log2(g_k / h_k) with one
/// pseudo-count per bin. Ties keep the earliest cut.
std::vector<double> kl_partition(std::span<const double> key_scores, std::span<const double> nonkey_scores,
                                 std::size_t regions, std::size_t segments);

/// Routes validation samples by the thresholds alone (no trunk filtering)
/// and partitions the survivors at every depth.
DepthProfile measure_profile(const PrefixScores& keys, const PrefixScores& nonkeys,
                             std::span<const double> thresholds, std::size_t regions, std::size_t segments);
DepthProfile measure_profile(const BoostedEnsemble& e, std::span<const double> thresholds, const SampleSet& keys,
                             const SampleSet& nonkeys, std::size_t regions, std::size_t segments);

/// Best candidate of one DP cell: objective and trunk-rate exponent.
struct DpCandidate {
  double value = std::numeric_limits<double>::infinity();
  std::size_t exponent = 0;
};

/// Terminal case at 1-based depth d with incoming traffic p^e.
DpCandidate hat_dp(std::size_t d, std::size_t e, const DepthProfile& profile, const ModelCosts& costs,
                   const OptimizerParams& params);
/// Branch case at depth d < max depth; next_row holds dp(d+1, .).
DpCandidate check_dp(std::size_t d, std::size_t e, const DepthProfile& profile, const ModelCosts& costs,
                     const OptimizerParams& params, std::span<const double> next_row);

struct DpCell {
  DpCandidate hat;
  DpCandidate check;  // value is +inf at the last depth
  bool branch = false;
  double value() const noexcept { return branch ? check.value : hat.value; }
};

/// cells[(d - 1) * P + e] for d = 1..max_depth, e = 0..P-1.
struct DpTable {
  std::size_t max_depth = 0, grid = 0;
  std::vector<DpCell> cells;
  const DpCell& at(std::size_t d, std::size_t e) const { return cells[(d - 1) * grid + e]; }
};

struct DpResult {
  CascadeConfig config;
  double objective = 0.0;  // dp(1, 0)
  DpTable table;
};

/// Bottom-up DP over (depth, traffic exponent) and backtracking. With
/// `cache_final_sums` the K-region filter sums are tabulated per
/// (depth, exponent) first; both variants give bit-identical results.
DpResult run_dp(const DepthProfile& profile, const ModelCosts& costs, const OptimizerParams& params,
                std::span<const double> thresholds, bool cache_final_sums = true);

/// A configuration scored the way the DP scores it: traffic exponents
/// clamp at P-1 and terminal rates are taken from the config.
struct GridEvaluation {
  double objective = 0.0;
  double memory_bits = 0.0;
  double reject_time_ns = 0.0;
  bool on_grid = true;  // every trunk rate is a power of p
};
GridEvaluation evaluate_on_grid(const CascadeConfig& c, const DepthProfile& profile, const ModelCosts& costs,
                                const OptimizerParams& params);

/// One DP cell of one alpha candidate.
struct TraceRecord {
  double alpha = 0.0;
  std::size_t depth = 0;
  std::size_t exponent = 0;
  double hat_value = 0.0;
  std::size_t hat_exponent = 0;
  std::optional<double> check_value;
  std::size_t check_exponent = 0;
  bool branch = false;
};
std::string trace_to_jsonl(std::span<const TraceRecord> records);
std::vector<TraceRecord> trace_from_jsonl(const std::string& text);

struct AlphaCandidate {
  double alpha = 0.0;
  double objective = 0.0;
  std::size_t depth = 0;
};

struct OptimizeResult {
  CascadeConfig config;
  double objective = 0.0;
  std::optional<DepthProfile> profile;  // of the chosen alpha; empty for depth 0
  double alpha = 0.0;
  double classic_objective = 0.0;
  std::vector<AlphaCandidate> candidates;
  std::vector<TraceRecord> trace;
};

/// Sweeps alpha, runs the DP per profile and keeps the best configuration,
/// falling back to a single classical filter when that scores no worse.
OptimizeResult optimize(const BoostedEnsemble& e, const SampleSet& val_keys, const SampleSet& val_nonkeys,
                        const OptimizerParams& params, bool keep_trace = false);

struct ScalingConstants {
  double memory_bits = 0.0;
  double reject_ns = 0.0;
};

/// M_BF is the analytic size of a classical filter at (n, F); R_BF is the
/// median over 5 batches of the mean contains() time for at least 1e5
/// non-key queries against such a filter.
ScalingConstants measure_scaling_constants(std::size_t n, double target_fpr, const SampleSet& val_nonkeys,
                                           std::uint64_t seed = 0);

}  // namespace clbf
