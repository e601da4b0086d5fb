#include "clbf/cascade.hpp"

#include <algorithm>
#include <cmath>

#include "clbf/error.hpp"

namespace clbf {

namespace {

void check_rate(double f, const char* what) {
  if (!(f >= 0.0 && f <= 1.0)) fail(ErrorKind::kInvalidParameter, std::string(what) + " rate must lie in [0,1]");
}

BloomFilter make_filter(std::size_t capacity, double fpr, std::uint64_t seed) {
  return BloomFilter(capacity, std::max(fpr, kMinFpr), seed);
}

}  // namespace

void CascadeConfig::validate() const {
  require(target_fpr > 0.0 && target_fpr < 1.0, ErrorKind::kInvalidParameter, "target FPR must lie in (0,1)");
  require(lambda >= 0.0 && lambda <= 1.0, ErrorKind::kInvalidParameter, "lambda must lie in [0,1]");
  if (depth == 0) {
    require(branch_thresholds.empty() && trunk_fprs.empty() && branch_fprs.empty() && final_boundaries.empty() &&
                final_fprs.empty(),
            ErrorKind::kInvalidParameter, "a depth-0 config carries no cascade vectors");
    return;
  }
  require(trunk_fprs.size() == depth, ErrorKind::kDimensionMismatch, "need one trunk rate per depth");
  require(branch_thresholds.size() == depth - 1 && branch_fprs.size() == depth - 1, ErrorKind::kDimensionMismatch,
          "need depth-1 branch thresholds and rates");
  require(!final_fprs.empty() && final_boundaries.size() == final_fprs.size() + 1, ErrorKind::kDimensionMismatch,
          "need K final rates and K+1 boundaries");
  require(final_boundaries.front() == 0.0 && final_boundaries.back() == 1.0, ErrorKind::kInvalidParameter,
          "final boundaries must span [0,1]");
  for (std::size_t k = 1; k < final_boundaries.size(); ++k) {
    require(final_boundaries[k] > final_boundaries[k - 1], ErrorKind::kInvalidParameter,
            "final boundaries must be strictly ascending");
  }
  for (double f : trunk_fprs) check_rate(f, "trunk");
  for (double f : branch_fprs) check_rate(f, "branch");
  for (double f : final_fprs) check_rate(f, "final");
  for (double f : trunk_fprs) require(f > 0.0, ErrorKind::kInvalidParameter, "trunk rates must be positive");
}

void CascadeConfig::serialize(io::Writer& w) const {
  w.put<std::uint64_t>(depth);
  w.put_vector(branch_thresholds);
  w.put_vector(trunk_fprs);
  w.put_vector(branch_fprs);
  w.put_vector(final_boundaries);
  w.put_vector(final_fprs);
  w.put(target_fpr);
  w.put(lambda);
}

CascadeConfig CascadeConfig::deserialize(io::Reader& r) {
  CascadeConfig c;
  c.depth = r.get<std::uint64_t>();
  c.branch_thresholds = r.get_vector<double>();
  c.trunk_fprs = r.get_vector<double>();
  c.branch_fprs = r.get_vector<double>();
  c.final_boundaries = r.get_vector<double>();
  c.final_fprs = r.get_vector<double>();
  c.target_fpr = r.get<double>();
  c.lambda = r.get<double>();
  c.validate();
  return c;
}

std::size_t final_region(std::span<const double> boundaries, double s) {
  if (boundaries.size() <= 2) return 0;
  const auto inner = boundaries.subspan(1, boundaries.size() - 2);
  return static_cast<std::size_t>(std::upper_bound(inner.begin(), inner.end(), s) - inner.begin());
}

std::uint64_t filter_seed(std::uint64_t run_seed, FilterRole role, std::size_t index) {
  return mix64(mix64(run_seed ^ (static_cast<std::uint64_t>(role) << 56)) + index);
}

Clbf Clbf::build(CascadeConfig config, std::shared_ptr<const BoostedEnsemble> ensemble, const SampleSet& keys,
                 std::uint64_t seed) {
  config.validate();
  require(ensemble != nullptr, ErrorKind::kInvalidParameter, "ensemble required");
  require(config.depth <= ensemble->num_trees(), ErrorKind::kInvalidParameter,
          "config depth exceeds the ensemble's tree count");
  if (config.depth > 0) {
    require(keys.dim() == ensemble->dim(), ErrorKind::kDimensionMismatch, "key dimension differs from the model's");
  }

  Clbf c;
  c.config_ = std::move(config);
  c.ensemble_ = std::move(ensemble);
  c.key_count_ = keys.size();
  c.seed_ = seed;
  const auto& cfg = c.config_;

  if (cfg.depth == 0) {
    c.classic_ = BloomFilter(keys.size(), cfg.target_fpr, filter_seed(seed, FilterRole::kClassic, 0));
    for (std::size_t i = 0; i < keys.size(); ++i) c.classic_.insert(keys.id(i));
    return c;
  }

  std::vector<KeyRoute> routes(keys.size());
  std::vector<std::size_t> trunk_n(cfg.depth, 0), branch_n(cfg.depth - 1, 0), final_n(cfg.regions(), 0);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    routes[i] = c.route(keys.row(i));
    for (std::size_t d = 0; d < routes[i].trunks; ++d) ++trunk_n[d];
    ++(routes[i].branched ? branch_n : final_n)[routes[i].terminal];
  }
  for (std::size_t d = 0; d < cfg.depth; ++d) {
    c.trunks_.push_back(make_filter(trunk_n[d], cfg.trunk_fprs[d], filter_seed(seed, FilterRole::kTrunk, d)));
  }
  for (std::size_t d = 0; d + 1 < cfg.depth; ++d) {
    c.branches_.push_back(make_filter(branch_n[d], cfg.branch_fprs[d], filter_seed(seed, FilterRole::kBranch, d)));
  }
  for (std::size_t k = 0; k < cfg.regions(); ++k) {
    c.finals_.push_back(make_filter(final_n[k], cfg.final_fprs[k], filter_seed(seed, FilterRole::kFinal, k)));
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto d = digest(keys.id(i));
    const auto& r = routes[i];
    for (std::size_t t = 0; t < r.trunks; ++t) c.trunks_[t].insert(d);
    (r.branched ? c.branches_ : c.finals_)[r.terminal].insert(d);
  }
  return c;
}

KeyRoute Clbf::route(std::span<const double> x) const {
  const auto& cfg = config_;
  double margin = ensemble_->base_margin();
  for (std::size_t d = 0; d < cfg.depth; ++d) {
    margin += ensemble_->tree_output(d, x);
    const double s = sigmoid(margin);
    if (d + 1 == cfg.depth) return {d + 1, false, final_region(cfg.final_boundaries, s)};
    if (s >= cfg.branch_thresholds[d]) return {d + 1, true, d};
  }
  return {};
}

void Clbf::insert_key(std::span<const double> x, std::string_view id) {
  const auto d = digest(id);
  ++key_count_;
  if (config_.depth == 0) {
    classic_.insert(d);
    return;
  }
  const auto r = route(x);
  for (std::size_t t = 0; t < r.trunks; ++t) trunks_[t].insert(d);
  (r.branched ? branches_ : finals_)[r.terminal].insert(d);
}

bool Clbf::contains(std::span<const double> x, const KeyDigest& key, QueryStats* stats) const {
  const auto& cfg = config_;
  if (cfg.depth == 0) return classic_.contains(key);
  double margin = ensemble_->base_margin();
  for (std::size_t d = 0; d < cfg.depth; ++d) {
    if (!trunks_[d].contains(key)) return false;
    margin += ensemble_->tree_output(d, x);
    if (stats) ++stats->model_evaluations;
    const double s = sigmoid(margin);
    if (d + 1 == cfg.depth) return finals_[final_region(cfg.final_boundaries, s)].contains(key);
    if (s >= cfg.branch_thresholds[d]) return branches_[d].contains(key);
  }
  return false;
}

std::uint64_t Clbf::filter_bits() const {
  std::uint64_t bits = classic_.size_bits();
  for (const auto* group : {&trunks_, &branches_, &finals_}) {
    for (const auto& f : *group) bits += f.size_bits();
  }
  return bits;
}

std::string Clbf::serialize() const {
  io::Writer w;
  w.put_bytes("CLBF-V1");
  w.put<std::uint32_t>(1);
  w.put<std::uint64_t>(key_count_);
  w.put<std::uint64_t>(seed_);
  config_.serialize(w);
  if (config_.depth > 0) {
    ensemble_->truncated(config_.depth).serialize(w);
  } else {
    BoostedEnsemble({}, ensemble_->base_margin(), ensemble_->learning_rate(), ensemble_->max_depth(), ensemble_->dim())
        .serialize(w);
  }
  if (config_.depth == 0) {
    classic_.serialize(w);
  } else {
    for (const auto* group : {&trunks_, &branches_, &finals_}) {
      for (const auto& f : *group) f.serialize(w);
    }
  }
  w.put<std::uint8_t>(profile_ ? 1 : 0);
  if (profile_) profile_->serialize(w);
  return w.take();
}

Clbf Clbf::deserialize(std::string_view bytes) {
  io::Reader r(bytes);
  r.expect_magic("CLBF-V1");
  require(r.get<std::uint32_t>() == 1, ErrorKind::kFormat, "unsupported CLBF container version");
  Clbf c;
  c.key_count_ = r.get<std::uint64_t>();
  c.seed_ = r.get<std::uint64_t>();
  c.config_ = CascadeConfig::deserialize(r);
  c.ensemble_ = std::make_shared<const BoostedEnsemble>(BoostedEnsemble::deserialize(r));
  require(c.ensemble_->num_trees() == c.config_.depth, ErrorKind::kFormat, "tree count does not match depth");
  if (c.config_.depth == 0) {
    c.classic_ = BloomFilter::deserialize(r);
  } else {
    for (std::size_t d = 0; d < c.config_.depth; ++d) c.trunks_.push_back(BloomFilter::deserialize(r));
    for (std::size_t d = 0; d + 1 < c.config_.depth; ++d) c.branches_.push_back(BloomFilter::deserialize(r));
    for (std::size_t k = 0; k < c.config_.regions(); ++k) c.finals_.push_back(BloomFilter::deserialize(r));
  }
  if (r.get<std::uint8_t>()) c.profile_ = DepthProfile::deserialize(r);
  require(r.at_end(), ErrorKind::kFormat, "trailing bytes after CLBF container");
  return c;
}

namespace {

void check_profile_depth(const CascadeConfig& c, const DepthProfile& p) {
  require(c.depth <= p.max_depth(), ErrorKind::kDimensionMismatch, "profile is shallower than the config");
  if (c.depth > 0) {
    require(p.regions() == c.regions(), ErrorKind::kDimensionMismatch, "profile and config disagree on K");
  }
}

}  // namespace

double analytic_memory_bits(const CascadeConfig& c, const ModelCosts& costs, const DepthProfile& profile,
                            std::size_t n) {
  if (c.depth == 0) return s_tilde(1.0, c.target_fpr, n);
  check_profile_depth(c, profile);
  require(c.depth <= costs.depth(), ErrorKind::kDimensionMismatch, "costs shorter than the config");
  double bits = 0.0;
  for (std::size_t d = 0; d < c.depth; ++d) bits += costs.size_bits[d];
  for (std::size_t d = 0; d < c.depth; ++d) bits += s_tilde(profile.g_trunk[d], c.trunk_fprs[d], n);
  for (std::size_t d = 0; d + 1 < c.depth; ++d) bits += s_tilde(profile.g_branch[d], c.branch_fprs[d], n);
  for (std::size_t k = 0; k < c.regions(); ++k) bits += s_tilde(profile.g_final[c.depth - 1][k], c.final_fprs[k], n);
  return bits;
}

double expected_model_evaluations(const CascadeConfig& c, const DepthProfile& profile) {
  check_profile_depth(c, profile);
  double total = 0.0;
  double pass = 1.0;
  for (std::size_t d = 0; d < c.depth; ++d) {
    pass *= c.trunk_fprs[d];
    total += profile.h_trunk[d] * pass;
  }
  return total;
}

double analytic_reject_time_ns(const CascadeConfig& c, const ModelCosts& costs, const DepthProfile& profile) {
  check_profile_depth(c, profile);
  require(c.depth <= costs.depth(), ErrorKind::kDimensionMismatch, "costs shorter than the config");
  double total = 0.0;
  double pass = 1.0;
  for (std::size_t d = 0; d < c.depth; ++d) {
    pass *= c.trunk_fprs[d];
    total += costs.time_ns[d] * profile.h_trunk[d] * pass;
  }
  return total;
}

double analytic_fpr(const CascadeConfig& c, const DepthProfile& profile) {
  if (c.depth == 0) return c.target_fpr;
  check_profile_depth(c, profile);
  double total = 0.0;
  double pass = 1.0;
  for (std::size_t d = 0; d + 1 < c.depth; ++d) {
    pass *= c.trunk_fprs[d];
    total += profile.h_branch[d] * pass * c.branch_fprs[d];
  }
  pass *= c.trunk_fprs[c.depth - 1];
  for (std::size_t k = 0; k < c.regions(); ++k) total += profile.h_final[c.depth - 1][k] * pass * c.final_fprs[k];
  return total;
}

}  // namespace clbf
