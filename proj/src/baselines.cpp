#include "clbf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clbf/cost_model.hpp"
#include "clbf/error.hpp"
#include "clbf/optimizer.hpp"

namespace clbf {

namespace {

double score(const BoostedEnsemble& e, std::span<const double> x, std::size_t depth) {
  double m = e.base_margin();
  for (std::size_t d = 0; d < depth; ++d) m += e.tree_output(d, x);
  return sigmoid(m);
}

void check_model(const std::shared_ptr<const BoostedEnsemble>& e, std::size_t depth, const SampleSet& keys) {
  require(e != nullptr, ErrorKind::kInvalidParameter, "ensemble required");
  require(depth >= 1 && depth <= e->num_trees(), ErrorKind::kInvalidParameter, "model depth out of range");
  require(keys.empty() || keys.dim() == e->dim(), ErrorKind::kDimensionMismatch, "key dimension differs from the model's");
}

void put_model(io::Writer& w, const BoostedEnsemble& e, std::size_t depth) { e.truncated(depth).serialize(w); }

}  // namespace

BloomFilter build_classic(const SampleSet& keys, double target_fpr, std::uint64_t seed) {
  BloomFilter f(keys.size(), target_fpr, filter_seed(seed, FilterRole::kClassic, 0));
  for (const auto& id : keys.ids()) f.insert(id);
  return f;
}

std::string serialize_classic(const BloomFilter& f) {
  io::Writer w;
  w.put_bytes("BLOOM-V1");
  f.serialize(w);
  return w.take();
}

BloomFilter deserialize_classic(std::string_view bytes) {
  io::Reader r(bytes);
  r.expect_magic("BLOOM-V1");
  auto f = BloomFilter::deserialize(r);
  require(r.at_end(), ErrorKind::kFormat, "trailing bytes after filter");
  return f;
}

// ---------------------------------------------------------------- PLBF

Plbf Plbf::build(std::shared_ptr<const BoostedEnsemble> ensemble, std::size_t depth, const SampleSet& keys,
                 const SampleSet& val_keys, const SampleSet& val_nonkeys, double target_fpr, std::size_t regions,
                 std::size_t segments, std::uint64_t seed) {
  check_model(ensemble, depth, keys);
  require(target_fpr > 0.0 && target_fpr < 1.0, ErrorKind::kInvalidParameter, "target FPR must lie in (0,1)");
  require(!val_keys.empty() && !val_nonkeys.empty(), ErrorKind::kInvalidParameter, "validation sets must be non-empty");
  const PrefixScores ks(*ensemble, val_keys, depth), ns(*ensemble, val_nonkeys, depth);
  auto b = kl_partition(ks.at(depth), ns.at(depth), regions, segments);
  std::vector<double> g(regions, 0.0), h(regions, 0.0);
  for (double s : ks.at(depth)) g[final_region(b, s)] += 1.0;
  for (double s : ns.at(depth)) h[final_region(b, s)] += 1.0;
  std::vector<double> f(regions);
  const double budget = target_fpr * (1.0 - 1e-9);
  for (std::size_t k = 0; k < regions; ++k) {
    g[k] /= static_cast<double>(val_keys.size());
    h[k] /= static_cast<double>(val_nonkeys.size());
    f[k] = f_tilde(g[k], h[k], budget);
  }
  Plbf p = build_with(std::move(ensemble), depth, std::move(b), std::move(f), keys, target_fpr, seed);
  p.g_ = std::move(g);
  p.h_ = std::move(h);
  return p;
}

Plbf Plbf::build_with(std::shared_ptr<const BoostedEnsemble> ensemble, std::size_t depth,
                      std::vector<double> boundaries, std::vector<double> fprs, const SampleSet& keys,
                      double target_fpr, std::uint64_t seed) {
  check_model(ensemble, depth, keys);
  require(!fprs.empty() && boundaries.size() == fprs.size() + 1, ErrorKind::kDimensionMismatch,
          "need K rates and K+1 boundaries");
  Plbf p;
  p.ensemble_ = std::move(ensemble);
  p.depth_ = depth;
  p.target_fpr_ = target_fpr;
  p.boundaries_ = std::move(boundaries);
  p.fprs_ = std::move(fprs);
  p.key_count_ = keys.size();
  p.seed_ = seed;
  std::vector<std::size_t> region(keys.size()), count(p.fprs_.size(), 0);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    region[i] = final_region(p.boundaries_, score(*p.ensemble_, keys.row(i), depth));
    ++count[region[i]];
  }
  for (std::size_t k = 0; k < p.fprs_.size(); ++k) {
    p.filters_.emplace_back(count[k], std::max(p.fprs_[k], kMinFpr), filter_seed(seed, FilterRole::kFinal, k));
  }
  for (std::size_t i = 0; i < keys.size(); ++i) p.filters_[region[i]].insert(keys.id(i));
  return p;
}

bool Plbf::contains(std::span<const double> x, const KeyDigest& d, QueryStats* stats) const {
  if (stats) stats->model_evaluations += depth_;
  return filters_[final_region(boundaries_, score(*ensemble_, x, depth_))].contains(d);
}

double Plbf::analytic_fpr() const {
  double total = 0.0;
  for (std::size_t k = 0; k < h_.size(); ++k) total += h_[k] * fprs_[k];
  return total;
}

std::uint64_t Plbf::filter_bits() const {
  std::uint64_t bits = 0;
  for (const auto& f : filters_) bits += f.size_bits();
  return bits;
}

std::string Plbf::serialize() const {
  io::Writer w;
  w.put_bytes("PLBF-V1");
  w.put<std::uint32_t>(1);
  w.put<std::uint64_t>(key_count_);
  w.put<std::uint64_t>(seed_);
  w.put<std::uint64_t>(depth_);
  w.put(target_fpr_);
  w.put_vector(boundaries_);
  w.put_vector(fprs_);
  w.put_vector(g_);
  w.put_vector(h_);
  put_model(w, *ensemble_, depth_);
  for (const auto& f : filters_) f.serialize(w);
  return w.take();
}

Plbf Plbf::deserialize(std::string_view bytes) {
  io::Reader r(bytes);
  r.expect_magic("PLBF-V1");
  require(r.get<std::uint32_t>() == 1, ErrorKind::kFormat, "unsupported PLBF container version");
  Plbf p;
  p.key_count_ = r.get<std::uint64_t>();
  p.seed_ = r.get<std::uint64_t>();
  p.depth_ = r.get<std::uint64_t>();
  p.target_fpr_ = r.get<double>();
  p.boundaries_ = r.get_vector<double>();
  p.fprs_ = r.get_vector<double>();
  p.g_ = r.get_vector<double>();
  p.h_ = r.get_vector<double>();
  require(!p.fprs_.empty() && p.boundaries_.size() == p.fprs_.size() + 1, ErrorKind::kFormat, "bad PLBF partition");
  p.ensemble_ = std::make_shared<const BoostedEnsemble>(BoostedEnsemble::deserialize(r));
  require(p.ensemble_->num_trees() == p.depth_, ErrorKind::kFormat, "tree count does not match depth");
  for (std::size_t k = 0; k < p.fprs_.size(); ++k) p.filters_.push_back(BloomFilter::deserialize(r));
  require(r.at_end(), ErrorKind::kFormat, "trailing bytes after PLBF container");
  return p;
}

CascadeConfig plbf_as_cascade(const Plbf& p) {
  CascadeConfig c;
  c.depth = p.depth();
  c.branch_thresholds.assign(c.depth - 1, 2.0);
  c.trunk_fprs.assign(c.depth, 1.0);
  c.branch_fprs.assign(c.depth - 1, 1.0);
  c.final_boundaries = p.boundaries();
  c.final_fprs = p.fprs();
  c.target_fpr = p.target_fpr();
  return c;
}

// ---------------------------------------------------------- sandwiched

Sandwiched Sandwiched::build(std::shared_ptr<const BoostedEnsemble> ensemble, std::size_t depth, const SampleSet& keys,
                             const SampleSet& val_keys, const SampleSet& val_nonkeys, double target_fpr, double p,
                             std::size_t grid_size, std::span<const double> alpha_grid, std::uint64_t seed) {
  check_model(ensemble, depth, keys);
  require(target_fpr > 0.0 && target_fpr < 1.0, ErrorKind::kInvalidParameter, "target FPR must lie in (0,1)");
  require(p > 0.0 && p < 1.0 && grid_size >= 1, ErrorKind::kInvalidParameter, "bad pre-filter grid");
  require(!val_keys.empty() && !val_nonkeys.empty(), ErrorKind::kInvalidParameter, "validation sets must be non-empty");
  const PrefixScores ks(*ensemble, val_keys, depth), ns(*ensemble, val_nonkeys, depth);
  const auto sk = ks.at(depth), sn = ns.at(depth);

  std::vector<double> taus;
  for (double a : alpha_grid) taus.push_back(threshold_for_alpha(sn, a));
  taus.push_back(std::numeric_limits<double>::infinity());

  const double budget = target_fpr * (1.0 - 1e-9);
  const double model_bits = 8.0 * static_cast<double>(ensemble->prefix_size_bytes(depth));
  bool found = false;
  SandwichParams best;
  double best_bits = 0.0, best_fpr = 0.0;
  for (std::size_t j = 0; j < grid_size; ++j) {
    const double pre = std::pow(p, static_cast<double>(j));
    for (double tau : taus) {
      const double g_lo = static_cast<double>(std::count_if(sk.begin(), sk.end(), [&](double s) { return s < tau; })) /
                          static_cast<double>(sk.size());
      const double h_lo = static_cast<double>(std::count_if(sn.begin(), sn.end(), [&](double s) { return s < tau; })) /
                          static_cast<double>(sn.size());
      const double h_hi = 1.0 - h_lo;
      const double spare = budget / pre - h_hi;  // rate budget left for the backup, times h_lo
      double backup;
      if (h_lo <= 0.0) {
        if (spare < 0.0) continue;
        backup = 1.0;
      } else if (g_lo <= 0.0) {
        if (spare < 0.0) continue;
        backup = 0.0;
      } else {
        if (spare <= 0.0) continue;
        backup = std::min(1.0, spare / h_lo);
      }
      const double bits = model_bits + s_tilde(1.0, pre, keys.size()) + s_tilde(g_lo, backup, keys.size());
      if (!found || bits < best_bits) {
        found = true;
        best = {pre, tau, backup};
        best_bits = bits;
        best_fpr = pre * (h_hi + h_lo * backup);
      }
    }
  }
  require(found, ErrorKind::kInvalidParameter, "no sandwiched configuration meets the target FPR");
  Sandwiched s = build_with(std::move(ensemble), depth, best, keys, target_fpr, seed);
  s.analytic_fpr_ = best_fpr;
  s.analytic_bits_ = best_bits;
  return s;
}

Sandwiched Sandwiched::build_with(std::shared_ptr<const BoostedEnsemble> ensemble, std::size_t depth,
                                  SandwichParams params, const SampleSet& keys, double target_fpr,
                                  std::uint64_t seed) {
  check_model(ensemble, depth, keys);
  require(params.pre_fpr > 0.0 && params.pre_fpr <= 1.0 && params.backup_fpr >= 0.0 && params.backup_fpr <= 1.0,
          ErrorKind::kInvalidParameter, "sandwich rates must lie in [0,1]");
  Sandwiched s;
  s.ensemble_ = std::move(ensemble);
  s.depth_ = depth;
  s.target_fpr_ = target_fpr;
  s.params_ = params;
  s.key_count_ = keys.size();
  s.seed_ = seed;
  std::vector<char> low(keys.size());
  std::size_t n_low = 0;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    low[i] = score(*s.ensemble_, keys.row(i), depth) < params.threshold;
    n_low += low[i];
  }
  s.pre_ = BloomFilter(keys.size(), params.pre_fpr, filter_seed(seed, FilterRole::kTrunk, 0));
  s.backup_ = BloomFilter(n_low, std::max(params.backup_fpr, kMinFpr), filter_seed(seed, FilterRole::kFinal, 0));
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto d = digest(keys.id(i));
    s.pre_.insert(d);
    if (low[i]) s.backup_.insert(d);
  }
  return s;
}

bool Sandwiched::contains(std::span<const double> x, const KeyDigest& d, QueryStats* stats) const {
  if (!pre_.contains(d)) return false;
  if (stats) stats->model_evaluations += depth_;
  if (score(*ensemble_, x, depth_) >= params_.threshold) return true;
  return backup_.contains(d);
}

CascadeConfig Sandwiched::as_cascade() const {
  CascadeConfig c;
  c.depth = depth_;
  c.branch_thresholds.assign(depth_ - 1, 2.0);
  c.trunk_fprs.assign(depth_, 1.0);
  c.trunk_fprs[0] = params_.pre_fpr;
  c.branch_fprs.assign(depth_ - 1, 1.0);
  if (params_.threshold >= 1.0) {
    c.final_boundaries = {0.0, 1.0};
    c.final_fprs = {params_.backup_fpr};
  } else {
    c.final_boundaries = {0.0, params_.threshold, 1.0};
    c.final_fprs = {params_.backup_fpr, 1.0};
  }
  c.target_fpr = target_fpr_;
  return c;
}

std::string Sandwiched::serialize() const {
  io::Writer w;
  w.put_bytes("SLBF-V1");
  w.put<std::uint32_t>(1);
  w.put<std::uint64_t>(key_count_);
  w.put<std::uint64_t>(seed_);
  w.put<std::uint64_t>(depth_);
  w.put(target_fpr_);
  w.put(params_.pre_fpr);
  w.put(params_.threshold);
  w.put(params_.backup_fpr);
  w.put(analytic_fpr_);
  w.put(analytic_bits_);
  put_model(w, *ensemble_, depth_);
  pre_.serialize(w);
  backup_.serialize(w);
  return w.take();
}

Sandwiched Sandwiched::deserialize(std::string_view bytes) {
  io::Reader r(bytes);
  r.expect_magic("SLBF-V1");
  require(r.get<std::uint32_t>() == 1, ErrorKind::kFormat, "unsupported sandwiched container version");
  Sandwiched s;
  s.key_count_ = r.get<std::uint64_t>();
  s.seed_ = r.get<std::uint64_t>();
  s.depth_ = r.get<std::uint64_t>();
  s.target_fpr_ = r.get<double>();
  s.params_.pre_fpr = r.get<double>();
  s.params_.threshold = r.get<double>();
  s.params_.backup_fpr = r.get<double>();
  s.analytic_fpr_ = r.get<double>();
  s.analytic_bits_ = r.get<double>();
  s.ensemble_ = std::make_shared<const BoostedEnsemble>(BoostedEnsemble::deserialize(r));
  require(s.ensemble_->num_trees() == s.depth_, ErrorKind::kFormat, "tree count does not match depth");
  s.pre_ = BloomFilter::deserialize(r);
  s.backup_ = BloomFilter::deserialize(r);
  require(r.at_end(), ErrorKind::kFormat, "trailing bytes after sandwiched container");
  return s;
}

}  // namespace clbf
