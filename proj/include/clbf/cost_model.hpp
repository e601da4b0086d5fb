#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "clbf/binary_io.hpp"
#include "clbf/gbdt.hpp"

namespace clbf {

/// Optimal rate of a terminal filter receiving key fraction g and non-key
/// fraction h under an overall budget F: min(F g / h, 1), and 1 when h == 0.
double f_tilde(double g, double h, double budget);

/// Analytic Bloom filter size in bits for a fraction g of n keys at rate
/// eps: log2(e) * n * g * log2(1/eps). Zero when g == 0 or eps == 1.
double s_tilde(double g, double eps, std::size_t n);

/// Routing proportions measured on validation data with trunk filtering
/// disabled. Indices are 0-based: entry d describes TBF_{d+1} / ML_{d+1}.
struct DepthProfile {
  std::vector<double> g_trunk, h_trunk;    // reaching TBF_d
  std::vector<double> g_branch, h_branch;  // branching into BBF_d (last entry 0)
  std::vector<std::vector<double>> boundaries;  // per-depth final partition t_0..t_K
  std::vector<std::vector<double>> g_final, h_final;  // per-depth K-region tables
  std::vector<double> thresholds;  // branch thresholds used for the measurement

  // Raw counts, filled when the profile is measured from samples.
  std::size_t key_total = 0, nonkey_total = 0;
  std::vector<std::size_t> key_trunk, nonkey_trunk, key_branch, nonkey_branch;

  std::size_t max_depth() const noexcept { return g_trunk.size(); }
  std::size_t regions() const noexcept { return g_final.empty() ? 0 : g_final.front().size(); }

  /// Shape and range checks; throws on violation.
  void validate() const;

  void serialize(io::Writer& w) const;
  static DepthProfile deserialize(io::Reader& r);
};

/// Per-weak-learner cost constants in the objective's units.
struct ModelCosts {
  std::vector<double> size_bits;  // 8 * Size(ML_d)
  std::vector<double> time_ns;    // Time(ML_d); zeros when uncalibrated

  std::size_t depth() const noexcept { return size_bits.size(); }
  static ModelCosts from(const BoostedEnsemble& e);
};

}  // namespace clbf
