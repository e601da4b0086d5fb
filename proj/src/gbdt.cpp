#include "clbf/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "clbf/error.hpp"
#include "clbf/timing.hpp"

namespace clbf {

double sigmoid(double margin) noexcept {
  const double s = 1.0 / (1.0 + std::exp(-margin));
  if (!(s > 0.0)) return std::numeric_limits<double>::min();
  if (s >= 1.0) return std::nextafter(1.0, 0.0);
  return s;
}

RegressionTree::RegressionTree(std::vector<TreeNode> preorder_nodes) : nodes_(std::move(preorder_nodes)) {
  require(!nodes_.empty(), ErrorKind::kInvalidParameter, "tree needs at least one node");
}

std::size_t RegressionTree::internal_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
}

int RegressionTree::depth() const {
  std::function<int(std::int32_t)> rec = [&](std::int32_t i) -> int {
    const auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.is_leaf()) return 0;
    return 1 + std::max(rec(n.left), rec(n.right));
  };
  return rec(0);
}

BoostedEnsemble::BoostedEnsemble(std::vector<RegressionTree> trees, double base_margin, double learning_rate,
                                 int max_depth, std::size_t dim)
    : trees_(std::move(trees)), base_margin_(base_margin), learning_rate_(learning_rate), max_depth_(max_depth),
      dim_(dim) {}

double BoostedEnsemble::prefix_margin(std::span<const double> x, std::size_t depth) const {
  if (depth < 1 || depth > trees_.size()) fail(ErrorKind::kOutOfRange, "prefix depth out of range");
  double m = base_margin_;
  for (std::size_t i = 0; i < depth; ++i) m += trees_[i].predict(x);
  return m;
}

double BoostedEnsemble::prefix_score(std::span<const double> x, std::size_t depth) const {
  return sigmoid(prefix_margin(x, depth));
}

std::size_t BoostedEnsemble::tree_size_bytes(std::size_t depth) const {
  if (depth < 1 || depth > trees_.size()) fail(ErrorKind::kOutOfRange, "tree depth out of range");
  return trees_[depth - 1].size_bytes();
}

std::size_t BoostedEnsemble::prefix_size_bytes(std::size_t depth) const {
  require(depth <= trees_.size(), ErrorKind::kOutOfRange, "prefix depth out of range");
  std::size_t s = 0;
  for (std::size_t i = 0; i < depth; ++i) s += trees_[i].size_bytes();
  return s;
}

void BoostedEnsemble::set_tree_time_ns(std::vector<double> t) {
  require(t.size() == trees_.size(), ErrorKind::kDimensionMismatch, "one time per tree required");
  for (double v : t) require(v > 0.0, ErrorKind::kInvalidParameter, "tree times must be positive");
  time_ns_ = std::move(t);
}

BoostedEnsemble BoostedEnsemble::truncated(std::size_t depth) const {
  require(depth >= 1 && depth <= trees_.size(), ErrorKind::kOutOfRange, "truncation depth out of range");
  BoostedEnsemble out(std::vector<RegressionTree>(trees_.begin(), trees_.begin() + static_cast<std::ptrdiff_t>(depth)),
                      base_margin_, learning_rate_, max_depth_, dim_);
  if (calibrated()) out.time_ns_.assign(time_ns_.begin(), time_ns_.begin() + static_cast<std::ptrdiff_t>(depth));
  return out;
}

void BoostedEnsemble::serialize(io::Writer& w) const {
  w.put_bytes("CLBF-GBT1");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(trees_.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dim_));
  w.put<std::int32_t>(max_depth_);
  w.put<double>(base_margin_);
  w.put<double>(learning_rate_);
  for (const auto& t : trees_) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.nodes().size()));
    for (const auto& n : t.nodes()) {
      w.put<std::uint8_t>(n.is_leaf() ? 1 : 0);
      if (n.is_leaf()) {
        w.put<double>(n.value);
      } else {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(n.feature));
        w.put<double>(n.threshold);
      }
    }
  }
}

BoostedEnsemble BoostedEnsemble::deserialize(io::Reader& r) {
  r.expect_magic("CLBF-GBT1");
  const auto count = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint32_t>();
  const auto max_depth = r.get<std::int32_t>();
  const auto base = r.get<double>();
  const auto lr = r.get<double>();
  std::vector<RegressionTree> trees;
  trees.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto n = r.get<std::uint32_t>();
    require(n >= 1, ErrorKind::kFormat, "empty tree record");
    std::vector<TreeNode> nodes(n);
    for (auto& node : nodes) {
      if (r.get<std::uint8_t>()) {
        node.value = r.get<double>();
      } else {
        node.feature = static_cast<std::int32_t>(r.get<std::uint32_t>());
        require(static_cast<std::uint32_t>(node.feature) < dim, ErrorKind::kFormat, "feature index out of range");
        node.threshold = r.get<double>();
      }
    }
    // Rebuild child links from pre-order: left child follows its parent,
    // right child follows the left subtree.
    std::size_t cursor = 0;
    std::function<void()> link = [&]() {
      require(cursor < nodes.size(), ErrorKind::kFormat, "malformed pre-order tree");
      const std::size_t self = cursor++;
      if (nodes[self].is_leaf()) return;
      nodes[self].left = static_cast<std::int32_t>(cursor);
      link();
      nodes[self].right = static_cast<std::int32_t>(cursor);
      link();
    };
    link();
    require(cursor == nodes.size(), ErrorKind::kFormat, "trailing nodes in tree record");
    trees.emplace_back(std::move(nodes));
  }
  return BoostedEnsemble(std::move(trees), base, lr, max_depth, dim);
}

namespace {

struct GrowNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;
  int depth = 0;
  std::size_t count = 0;
  double sum_r = 0.0;
  double sum_h = 0.0;
  double sum_rr = 0.0;
};

struct SplitCandidate {
  double gain = 0.0;
  std::int32_t feature = -1;
  double threshold = 0.0;
  // running scan state
  std::size_t left_count = 0;
  double left_sum = 0.0;
  double last_x = 0.0;
  bool has_prev = false;
};

std::vector<TreeNode> to_preorder(const std::vector<GrowNode>& grown) {
  std::vector<TreeNode> out;
  out.reserve(grown.size());
  std::function<void(std::int32_t)> emit = [&](std::int32_t g) {
    const auto& n = grown[static_cast<std::size_t>(g)];
    const std::size_t self = out.size();
    TreeNode t;
    t.feature = n.feature;
    t.threshold = n.threshold;
    t.value = n.value;
    out.push_back(t);
    if (n.feature < 0) return;
    out[self].left = static_cast<std::int32_t>(out.size());
    emit(n.left);
    out[self].right = static_cast<std::int32_t>(out.size());
    emit(n.right);
  };
  emit(0);
  return out;
}

}  // namespace

BoostedEnsemble train(const SampleSet& keys, const SampleSet& nonkeys, const TrainParams& params) {
  require(params.rounds >= 1, ErrorKind::kInvalidParameter, "rounds must be >= 1");
  require(params.max_depth >= 0, ErrorKind::kInvalidParameter, "max_depth must be >= 0");
  require(params.learning_rate > 0.0, ErrorKind::kInvalidParameter, "learning_rate must be positive");
  require(!keys.empty() && !nonkeys.empty(), ErrorKind::kInvalidParameter, "need at least one key and one non-key");
  require(keys.dim() == nonkeys.dim(), ErrorKind::kDimensionMismatch, "key and non-key dimensionality differ");
  require(keys.dim() >= 1, ErrorKind::kInvalidParameter, "need at least one feature");

  const std::size_t dim = keys.dim();
  const std::size_t n = keys.size() + nonkeys.size();

  // Column-major copy for cache-friendly scans.
  std::vector<std::vector<double>> cols(dim, std::vector<double>(n));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool is_key = i < keys.size();
    const auto row = is_key ? keys.row(i) : nonkeys.row(i - keys.size());
    for (std::size_t f = 0; f < dim; ++f) cols[f][i] = row[f];
    y[i] = is_key ? 1.0 : 0.0;
  }
  std::vector<std::vector<std::uint32_t>> order(dim, std::vector<std::uint32_t>(n));
  for (std::size_t f = 0; f < dim; ++f) {
    std::iota(order[f].begin(), order[f].end(), 0u);
    std::stable_sort(order[f].begin(), order[f].end(),
                     [&](std::uint32_t a, std::uint32_t b) { return cols[f][a] < cols[f][b]; });
  }

  const double base = std::log(static_cast<double>(keys.size()) / static_cast<double>(nonkeys.size()));
  std::vector<double> margin(n, base);
  std::vector<double> resid(n), hess(n);
  std::vector<std::int32_t> node_of(n);
  std::vector<RegressionTree> trees;
  trees.reserve(static_cast<std::size_t>(params.rounds));

  for (int round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      resid[i] = y[i] - p;
      hess[i] = p * (1.0 - p);
    }
    std::vector<GrowNode> grown(1);
    std::fill(node_of.begin(), node_of.end(), 0);
    std::vector<std::int32_t> frontier{0};

    while (!frontier.empty()) {
      // Node totals for the current frontier.
      for (auto nd : frontier) {
        auto& g = grown[static_cast<std::size_t>(nd)];
        g.count = 0;
        g.sum_r = g.sum_h = g.sum_rr = 0.0;
      }
      for (std::size_t i = 0; i < n; ++i) {
        auto& g = grown[static_cast<std::size_t>(node_of[i])];
        ++g.count;
        g.sum_r += resid[i];
        g.sum_h += hess[i];
        g.sum_rr += resid[i] * resid[i];
      }
      std::vector<std::int32_t> slot_of(grown.size(), -1);
      std::vector<SplitCandidate> best(frontier.size());
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        const auto& g = grown[static_cast<std::size_t>(frontier[s])];
        if (g.depth < params.max_depth && g.count >= 2) slot_of[static_cast<std::size_t>(frontier[s])] = static_cast<std::int32_t>(s);
      }

      for (std::size_t f = 0; f < dim; ++f) {
        for (auto& b : best) {
          b.left_count = 0;
          b.left_sum = 0.0;
          b.has_prev = false;
        }
        const auto& col = cols[f];
        for (auto i : order[f]) {
          const auto s = slot_of[static_cast<std::size_t>(node_of[i])];
          if (s < 0) continue;
          auto& b = best[static_cast<std::size_t>(s)];
          const double x = col[i];
          if (b.has_prev && x > b.last_x) {
            const auto& g = grown[static_cast<std::size_t>(frontier[static_cast<std::size_t>(s)])];
            const double nl = static_cast<double>(b.left_count);
            const double nr = static_cast<double>(g.count - b.left_count);
            const double right_sum = g.sum_r - b.left_sum;
            const double gain = b.left_sum * b.left_sum / nl + right_sum * right_sum / nr -
                                g.sum_r * g.sum_r / static_cast<double>(g.count);
            if (gain > b.gain) {
              double thr = b.last_x + 0.5 * (x - b.last_x);
              if (!(thr > b.last_x)) thr = x;
              b.gain = gain;
              b.feature = static_cast<std::int32_t>(f);
              b.threshold = thr;
            }
          }
          ++b.left_count;
          b.left_sum += resid[i];
          b.last_x = x;
          b.has_prev = true;
        }
      }

      std::vector<std::int32_t> next;
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        const auto nd = static_cast<std::size_t>(frontier[s]);
        const auto& b = best[s];
        // Residual variance reductions below round-off are not real splits.
        const bool split = b.feature >= 0 && b.gain > 1e-10 * grown[nd].sum_rr + 1e-300;
        if (split) {
          const int child_depth = grown[nd].depth + 1;
          grown[nd].feature = b.feature;
          grown[nd].threshold = b.threshold;
          grown[nd].left = static_cast<std::int32_t>(grown.size());
          grown.push_back(GrowNode{.depth = child_depth});
          grown[nd].right = static_cast<std::int32_t>(grown.size());
          grown.push_back(GrowNode{.depth = child_depth});
          next.push_back(grown[nd].left);
          next.push_back(grown[nd].right);
        } else {
          grown[nd].value = params.learning_rate * grown[nd].sum_r / (grown[nd].sum_h + params.l2_leaf);
        }
      }
      if (next.empty()) break;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& g = grown[static_cast<std::size_t>(node_of[i])];
        if (g.feature >= 0) node_of[i] = cols[static_cast<std::size_t>(g.feature)][i] < g.threshold ? g.left : g.right;
      }
      frontier = std::move(next);
    }

    for (std::size_t i = 0; i < n; ++i) margin[i] += grown[static_cast<std::size_t>(node_of[i])].value;
    trees.emplace_back(to_preorder(grown));
  }
  return BoostedEnsemble(std::move(trees), base, params.learning_rate, params.max_depth, dim);
}

double logistic_loss(const BoostedEnsemble& e, const SampleSet& keys, const SampleSet& nonkeys, std::size_t depth) {
  double total = 0.0;
  auto term = [](double m, bool key) {
    // log(1 + exp(-m)) for keys, log(1 + exp(m)) for non-keys, overflow-safe.
    const double z = key ? -m : m;
    return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  };
  for (std::size_t i = 0; i < keys.size(); ++i) total += term(e.prefix_margin(keys.row(i), depth), true);
  for (std::size_t i = 0; i < nonkeys.size(); ++i) total += term(e.prefix_margin(nonkeys.row(i), depth), false);
  return total / static_cast<double>(keys.size() + nonkeys.size());
}

double auc(const BoostedEnsemble& e, const SampleSet& keys, const SampleSet& nonkeys, std::size_t depth) {
  std::vector<std::pair<double, int>> s;
  s.reserve(keys.size() + nonkeys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) s.emplace_back(e.prefix_margin(keys.row(i), depth), 1);
  for (std::size_t i = 0; i < nonkeys.size(); ++i) s.emplace_back(e.prefix_margin(nonkeys.row(i), depth), 0);
  std::sort(s.begin(), s.end());
  // Mann-Whitney U with midranks for ties.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j].first == s[i].first) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (s[k].second) rank_sum += mid;
    }
    i = j;
  }
  const double nk = static_cast<double>(keys.size());
  const double nn = static_cast<double>(nonkeys.size());
  return (rank_sum - nk * (nk + 1) / 2) / (nk * nn);
}

std::vector<double> calibrate_time(BoostedEnsemble& e, const SampleSet& samples, const CalibrationOptions& opts) {
  require(opts.repeats >= 1 && opts.batches >= 1, ErrorKind::kInvalidParameter, "repeats and batches must be >= 1");
  require(!samples.empty(), ErrorKind::kInvalidParameter, "calibration needs samples");
  std::vector<double> times(e.num_trees());
  const double evals = static_cast<double>(opts.repeats) * static_cast<double>(samples.size());
  for (std::size_t t = 0; t < e.num_trees(); ++t) {
    const auto& tree = e.tree(t);
    double sink = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) sink += tree.predict(samples.row(i));  // warm-up
    std::vector<double> batch(static_cast<std::size_t>(opts.batches));
    for (auto& b : batch) {
      const auto t0 = now_ns();
      for (int r = 0; r < opts.repeats; ++r) {
        for (std::size_t i = 0; i < samples.size(); ++i) {
          sink += tree.predict(samples.row(i));
        }
        do_not_optimize(sink);
      }
      b = static_cast<double>(now_ns() - t0) / evals;
    }
    do_not_optimize(sink);
    times[t] = std::max(median(std::move(batch)), 1e-3);
  }
  e.set_tree_time_ns(times);
  return times;
}

}  // namespace clbf
