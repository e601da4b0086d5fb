#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "clbf/binary_io.hpp"
#include "clbf/samples.hpp"

namespace clbf {

/// Logistic function clamped to the open interval (0, 1).
double sigmoid(double margin) noexcept;

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] < threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // leaf output, learning rate already applied

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Binary regression tree stored in pre-order: the left child of an
/// internal node always sits at the next index.
class RegressionTree {
 public:
  RegressionTree() : nodes_{TreeNode{}} {}
  explicit RegressionTree(std::vector<TreeNode> preorder_nodes);

  double predict(std::span<const double> x) const noexcept {
    const TreeNode* n = nodes_.data();
    while (n->feature >= 0) {
      n = nodes_.data() + (x[static_cast<std::size_t>(n->feature)] < n->threshold ? n->left : n->right);
    }
    return n->value;
  }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t internal_count() const noexcept;
  std::size_t leaf_count() const noexcept { return nodes_.size() - internal_count(); }
  int depth() const;

  /// 20 bytes per internal node (4 feature index + 8 threshold + 8 child
  /// offsets) and 8 bytes per leaf value.
  std::size_t size_bytes() const noexcept { return internal_count() * 20 + leaf_count() * 8; }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

 private:
  std::vector<TreeNode> nodes_;
};

struct TrainParams {
  int rounds = 100;
  int max_depth = 6;
  double learning_rate = 0.3;
  double l2_leaf = 1.0;  // denominator regularizer of the Newton leaf step
  std::uint64_t seed = 0;  // training draws no randomness; kept for provenance
};

/// Ordered weak learners ML_1..ML_D. Depth arguments are 1-based: depth d
/// means "the first d trees".
class BoostedEnsemble {
 public:
  BoostedEnsemble() = default;
  BoostedEnsemble(std::vector<RegressionTree> trees, double base_margin, double learning_rate, int max_depth,
                  std::size_t dim);

  std::size_t num_trees() const noexcept { return trees_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  double base_margin() const noexcept { return base_margin_; }
  double learning_rate() const noexcept { return learning_rate_; }
  int max_depth() const noexcept { return max_depth_; }
  const RegressionTree& tree(std::size_t index) const { return trees_.at(index); }

  /// Margin contribution of the tree at 0-based `index`.
  double tree_output(std::size_t index, std::span<const double> x) const noexcept {
    return trees_[index].predict(x);
  }

  double prefix_margin(std::span<const double> x, std::size_t depth) const;
  double prefix_score(std::span<const double> x, std::size_t depth) const;

  std::size_t tree_size_bytes(std::size_t depth) const;
  /// Sum of tree_size_bytes over the first `depth` trees.
  std::size_t prefix_size_bytes(std::size_t depth) const;

  /// Mean single-tree inference time per tree; empty until calibrated.
  const std::vector<double>& tree_time_ns() const noexcept { return time_ns_; }
  void set_tree_time_ns(std::vector<double> t);
  bool calibrated() const noexcept { return time_ns_.size() == trees_.size() && !trees_.empty(); }

  /// Copy restricted to the first `depth` trees (timings carried along).
  BoostedEnsemble truncated(std::size_t depth) const;

  /// "CLBF-GBT1" record; timing calibration is not part of the format.
  void serialize(io::Writer& w) const;
  static BoostedEnsemble deserialize(io::Reader& r);

  bool same_model(const BoostedEnsemble& o) const {
    return trees_ == o.trees_ && base_margin_ == o.base_margin_ && learning_rate_ == o.learning_rate_ &&
           max_depth_ == o.max_depth_ && dim_ == o.dim_;
  }

 private:
  std::vector<RegressionTree> trees_;
  double base_margin_ = 0.0;
  double learning_rate_ = 0.3;
  int max_depth_ = 6;
  std::size_t dim_ = 0;
  std::vector<double> time_ns_;
};

/// Gradient boosting with logistic loss (keys labelled 1). Trees are grown
/// level-wise with exact greedy splits chosen by variance reduction of the
/// residuals; leaves take a Newton step.
BoostedEnsemble train(const SampleSet& keys, const SampleSet& nonkeys, const TrainParams& params);

/// Mean logistic loss of the first `depth` trees over both sets.
double logistic_loss(const BoostedEnsemble& e, const SampleSet& keys, const SampleSet& nonkeys, std::size_t depth);

/// Area under the ROC curve of the `depth`-prefix score (ties count half).
double auc(const BoostedEnsemble& e, const SampleSet& keys, const SampleSet& nonkeys, std::size_t depth);

struct CalibrationOptions {
  int repeats = 20;
  int batches = 5;
};

/// Time(ML_d): median over batches of the mean wall-clock of evaluating
/// tree d alone on every sample, `repeats` times per batch. Stores the
/// result in the ensemble and returns it.
std::vector<double> calibrate_time(BoostedEnsemble& e, const SampleSet& samples, const CalibrationOptions& opts = {});

}  // namespace clbf
