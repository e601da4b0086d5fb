#include "clbf/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "clbf/bloom_filter.hpp"
#include "clbf/error.hpp"
#include "clbf/timing.hpp"

namespace clbf {

std::vector<double> default_alpha_grid() {
  return {0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001, 0.0005, 0.0002, 0.0001, 0.0};
}

void OptimizerParams::validate() const {
  require(target_fpr > 0.0 && target_fpr < 1.0, ErrorKind::kInvalidParameter, "target FPR must lie in (0,1)");
  require(lambda >= 0.0 && lambda <= 1.0, ErrorKind::kInvalidParameter, "lambda must lie in [0,1]");
  require(p > 0.0 && p < 1.0, ErrorKind::kInvalidParameter, "p must lie in (0,1)");
  require(grid_size >= 1, ErrorKind::kInvalidParameter, "P must be at least 1");
  require(regions >= 1, ErrorKind::kInvalidParameter, "K must be at least 1");
  require(segments >= regions, ErrorKind::kInvalidParameter, "segments must be at least K");
  require(!alpha_grid.empty(), ErrorKind::kInvalidParameter, "alpha grid is empty");
  for (double a : alpha_grid) require(a >= 0.0 && a < 1.0, ErrorKind::kInvalidParameter, "alpha must lie in [0,1)");
  require(memory_scale_bits > 0.0, ErrorKind::kInvalidParameter, "M_BF must be positive");
  require(lambda == 1.0 || reject_scale_ns > 0.0, ErrorKind::kInvalidParameter, "R_BF must be positive");
  require(num_keys >= 1, ErrorKind::kInvalidParameter, "key count must be positive");
}

PrefixScores::PrefixScores(const BoostedEnsemble& e, const SampleSet& samples, std::size_t max_depth)
    : depth_(max_depth), count_(samples.size()), values_(max_depth * samples.size()) {
  require(max_depth <= e.num_trees(), ErrorKind::kInvalidParameter, "depth exceeds the ensemble");
  require(samples.empty() || samples.dim() == e.dim(), ErrorKind::kDimensionMismatch, "sample dimension mismatch");
  for (std::size_t i = 0; i < count_; ++i) {
    const auto x = samples.row(i);
    double margin = e.base_margin();
    for (std::size_t d = 0; d < depth_; ++d) {
      margin += e.tree_output(d, x);
      values_[d * count_ + i] = sigmoid(margin);
    }
  }
}

double threshold_for_alpha(std::span<const double> scores, double alpha) {
  require(!scores.empty(), ErrorKind::kInvalidParameter, "no scores to take a quantile of");
  require(alpha >= 0.0 && alpha < 1.0, ErrorKind::kInvalidParameter, "alpha must lie in [0,1)");
  const auto m = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(scores.size()) + 1e-9));
  if (m == 0) {
    return std::nextafter(*std::max_element(scores.begin(), scores.end()), std::numeric_limits<double>::infinity());
  }
  std::vector<double> s(scores.begin(), scores.end());
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(m - 1), s.end(), std::greater<>());
  return s[m - 1];
}

std::vector<double> candidate_thresholds(const PrefixScores& nonkeys, double alpha) {
  std::vector<double> t;
  for (std::size_t d = 1; d < nonkeys.max_depth(); ++d) t.push_back(threshold_for_alpha(nonkeys.at(d), alpha));
  return t;
}

namespace {

std::size_t score_bin(double s, std::size_t segments) {
  const double b = std::floor(s * static_cast<double>(segments));
  if (b <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(b), segments - 1);
}

}  // namespace

std::vector<double> kl_partition(std::span<const double> key_scores, std::span<const double> nonkey_scores,
                                 std::size_t regions, std::size_t segments) {
  require(regions >= 1, ErrorKind::kInvalidParameter, "K must be at least 1");
  require(regions <= segments, ErrorKind::kInvalidParameter, "K exceeds the number of segments");
  if (regions == 1) return {0.0, 1.0};

  const std::size_t S = segments;
  std::vector<std::size_t> pk(S + 1, 0), pn(S + 1, 0);
  for (double s : key_scores) ++pk[score_bin(s, S) + 1];
  for (double s : nonkey_scores) ++pn[score_bin(s, S) + 1];
  for (std::size_t i = 1; i <= S; ++i) {
    pk[i] += pk[i - 1];
    pn[i] += pn[i - 1];
  }
  const double nk = static_cast<double>(key_scores.size() + S);
  const double nn = static_cast<double>(nonkey_scores.size() + S);
  // term[a * (S + 1) + b]: contribution of the region covering bins [a, b).
  std::vector<double> term((S + 1) * (S + 1), 0.0);
  for (std::size_t a = 0; a < S; ++a) {
    for (std::size_t b = a + 1; b <= S; ++b) {
      const double w = static_cast<double>(b - a);
      const double g = (static_cast<double>(pk[b] - pk[a]) + w) / nk;
      const double h = (static_cast<double>(pn[b] - pn[a]) + w) / nn;
      term[a * (S + 1) + b] = g * std::log2(g / h);
    }
  }

  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> best((regions + 1) * (S + 1), ninf);
  std::vector<std::size_t> from((regions + 1) * (S + 1), 0);
  auto at = [&](std::size_t r, std::size_t i) -> double& { return best[r * (S + 1) + i]; };
  for (std::size_t i = 1; i <= S; ++i) at(1, i) = term[i];
  for (std::size_t r = 2; r <= regions; ++r) {
    for (std::size_t i = r; i <= S; ++i) {
      for (std::size_t j = r - 1; j < i; ++j) {
        const double v = at(r - 1, j) + term[j * (S + 1) + i];
        if (v > at(r, i)) {
          at(r, i) = v;
          from[r * (S + 1) + i] = j;
        }
      }
    }
  }

  std::vector<std::size_t> cuts(regions + 1);
  cuts[regions] = S;
  for (std::size_t r = regions; r >= 2; --r) cuts[r - 1] = from[r * (S + 1) + cuts[r]];
  std::vector<double> out(regions + 1);
  for (std::size_t r = 0; r <= regions; ++r) out[r] = static_cast<double>(cuts[r]) / static_cast<double>(S);
  out.front() = 0.0;
  out.back() = 1.0;
  return out;
}

namespace {

// Deepest 0-based trunk index each sample reaches and whether it branched
// there.
struct Reach {
  std::vector<std::size_t> last;
  std::vector<char> branched;
};

Reach route_by_thresholds(const PrefixScores& ps, std::span<const double> thresholds) {
  const std::size_t D = ps.max_depth();
  Reach r{std::vector<std::size_t>(ps.size(), D - 1), std::vector<char>(ps.size(), 0)};
  for (std::size_t d = 0; d + 1 < D; ++d) {
    const auto s = ps.at(d + 1);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (r.branched[i] || r.last[i] < d) continue;
      if (s[i] >= thresholds[d]) {
        r.last[i] = d;
        r.branched[i] = 1;
      }
    }
  }
  return r;
}

}  // namespace

DepthProfile measure_profile(const PrefixScores& keys, const PrefixScores& nonkeys,
                             std::span<const double> thresholds, std::size_t regions, std::size_t segments) {
  const std::size_t D = keys.max_depth();
  require(D >= 1 && nonkeys.max_depth() == D, ErrorKind::kDimensionMismatch, "score tables disagree on depth");
  require(thresholds.size() == D - 1, ErrorKind::kDimensionMismatch, "need max_depth - 1 thresholds");
  require(keys.size() > 0 && nonkeys.size() > 0, ErrorKind::kInvalidParameter, "validation sets must be non-empty");

  const Reach rk = route_by_thresholds(keys, thresholds);
  const Reach rn = route_by_thresholds(nonkeys, thresholds);

  DepthProfile p;
  p.thresholds.assign(thresholds.begin(), thresholds.end());
  p.key_total = keys.size();
  p.nonkey_total = nonkeys.size();
  p.key_trunk.assign(D, 0);
  p.nonkey_trunk.assign(D, 0);
  p.key_branch.assign(D, 0);
  p.nonkey_branch.assign(D, 0);
  auto tally = [&](const Reach& r, std::vector<std::size_t>& trunk, std::vector<std::size_t>& branch) {
    for (std::size_t i = 0; i < r.last.size(); ++i) {
      for (std::size_t d = 0; d <= r.last[i]; ++d) ++trunk[d];
      if (r.branched[i]) ++branch[r.last[i]];
    }
  };
  tally(rk, p.key_trunk, p.key_branch);
  tally(rn, p.nonkey_trunk, p.nonkey_branch);

  const double nk = static_cast<double>(p.key_total), nn = static_cast<double>(p.nonkey_total);
  for (std::size_t d = 0; d < D; ++d) {
    p.g_trunk.push_back(static_cast<double>(p.key_trunk[d]) / nk);
    p.h_trunk.push_back(static_cast<double>(p.nonkey_trunk[d]) / nn);
    p.g_branch.push_back(static_cast<double>(p.key_branch[d]) / nk);
    p.h_branch.push_back(static_cast<double>(p.nonkey_branch[d]) / nn);
  }

  std::vector<double> ks, ns;
  for (std::size_t d = 0; d < D; ++d) {
    ks.clear();
    ns.clear();
    const auto sk = keys.at(d + 1), sn = nonkeys.at(d + 1);
    for (std::size_t i = 0; i < sk.size(); ++i) {
      if (rk.last[i] >= d) ks.push_back(sk[i]);
    }
    for (std::size_t i = 0; i < sn.size(); ++i) {
      if (rn.last[i] >= d) ns.push_back(sn[i]);
    }
    auto b = kl_partition(ks, ns, regions, segments);
    std::vector<std::size_t> ck(regions, 0), cn(regions, 0);
    for (double s : ks) ++ck[final_region(b, s)];
    for (double s : ns) ++cn[final_region(b, s)];
    std::vector<double> gf(regions), hf(regions);
    for (std::size_t k = 0; k < regions; ++k) {
      gf[k] = static_cast<double>(ck[k]) / nk;
      hf[k] = static_cast<double>(cn[k]) / nn;
    }
    p.boundaries.push_back(std::move(b));
    p.g_final.push_back(std::move(gf));
    p.h_final.push_back(std::move(hf));
  }
  return p;
}

DepthProfile measure_profile(const BoostedEnsemble& e, std::span<const double> thresholds, const SampleSet& keys,
                             const SampleSet& nonkeys, std::size_t regions, std::size_t segments) {
  const std::size_t D = thresholds.size() + 1;
  return measure_profile(PrefixScores(e, keys, D), PrefixScores(e, nonkeys, D), thresholds, regions, segments);
}

namespace {

std::vector<double> powers(const OptimizerParams& params) {
  std::vector<double> pw(params.grid_size);
  for (std::size_t j = 0; j < pw.size(); ++j) pw[j] = std::pow(params.p, static_cast<double>(j));
  return pw;
}

void check_shapes(const DepthProfile& profile, const ModelCosts& costs) {
  profile.validate();
  require(costs.depth() >= profile.max_depth() && costs.time_ns.size() >= profile.max_depth(),
          ErrorKind::kDimensionMismatch, "model costs shorter than the profile");
}

// Sum over final regions of the filter size at depth d (1-based) under
// incoming traffic t.
double final_sum(const DepthProfile& profile, std::size_t d, double t, const OptimizerParams& params) {
  const auto& g = profile.g_final[d - 1];
  const auto& h = profile.h_final[d - 1];
  double bits = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    bits += s_tilde(g[k], f_tilde(g[k], h[k] * t, params.budget()), params.num_keys);
  }
  return bits;
}

template <class Finals>
DpCandidate hat_impl(std::size_t d, std::size_t e, const DepthProfile& profile, const ModelCosts& costs,
                     const OptimizerParams& params, const std::vector<double>& pw, Finals finals) {
  const std::size_t P = params.grid_size;
  const double mw = params.memory_weight(), tw = params.time_weight();
  const double gt = profile.g_trunk[d - 1], ht = profile.h_trunk[d - 1];
  DpCandidate best;
  for (std::size_t j = 0; j < P; ++j) {
    const std::size_t c = std::min(e + j, P - 1);
    const double mem = costs.size_bits[d - 1] + s_tilde(gt, pw[j], params.num_keys) + finals(c);
    const double v = mw * mem + tw * costs.time_ns[d - 1] * ht * pw[c];
    if (v < best.value) best = {v, j};
  }
  return best;
}

DpCandidate check_impl(std::size_t d, std::size_t e, const DepthProfile& profile, const ModelCosts& costs,
                       const OptimizerParams& params, const std::vector<double>& pw, std::span<const double> next) {
  const std::size_t P = params.grid_size;
  const double mw = params.memory_weight(), tw = params.time_weight();
  const double gt = profile.g_trunk[d - 1], ht = profile.h_trunk[d - 1];
  const double gb = profile.g_branch[d - 1], hb = profile.h_branch[d - 1];
  DpCandidate best;
  for (std::size_t j = 0; j < P; ++j) {
    const std::size_t c = std::min(e + j, P - 1);
    const double fb = f_tilde(gb, hb * pw[c], params.budget());
    const double mem =
        costs.size_bits[d - 1] + s_tilde(gt, pw[j], params.num_keys) + s_tilde(gb, fb, params.num_keys);
    const double v = mw * mem + tw * costs.time_ns[d - 1] * ht * pw[c] + next[c];
    if (v < best.value) best = {v, j};
  }
  return best;
}

}  // namespace

DpCandidate hat_dp(std::size_t d, std::size_t e, const DepthProfile& profile, const ModelCosts& costs,
                   const OptimizerParams& params) {
  params.validate();
  check_shapes(profile, costs);
  require(d >= 1 && d <= profile.max_depth() && e < params.grid_size, ErrorKind::kOutOfRange, "DP cell out of range");
  const auto pw = powers(params);
  return hat_impl(d, e, profile, costs, params, pw,
                  [&](std::size_t c) { return final_sum(profile, d, pw[c], params); });
}

DpCandidate check_dp(std::size_t d, std::size_t e, const DepthProfile& profile, const ModelCosts& costs,
                     const OptimizerParams& params, std::span<const double> next_row) {
  params.validate();
  check_shapes(profile, costs);
  require(d >= 1 && d < profile.max_depth() && e < params.grid_size, ErrorKind::kOutOfRange, "DP cell out of range");
  require(next_row.size() == params.grid_size, ErrorKind::kDimensionMismatch, "next DP row has wrong length");
  return check_impl(d, e, profile, costs, params, powers(params), next_row);
}

DpResult run_dp(const DepthProfile& profile, const ModelCosts& costs, const OptimizerParams& params,
                std::span<const double> thresholds, bool cache_final_sums) {
  params.validate();
  check_shapes(profile, costs);
  const std::size_t D = profile.max_depth(), P = params.grid_size;
  require(thresholds.size() + 1 >= D, ErrorKind::kDimensionMismatch, "too few branch thresholds");
  const auto pw = powers(params);

  std::vector<double> cache;
  if (cache_final_sums) {
    cache.resize(D * P);
    for (std::size_t d = 1; d <= D; ++d) {
      for (std::size_t c = 0; c < P; ++c) cache[(d - 1) * P + c] = final_sum(profile, d, pw[c], params);
    }
  }

  DpResult out;
  out.table.max_depth = D;
  out.table.grid = P;
  out.table.cells.resize(D * P);
  std::vector<double> next(P), row(P);
  for (std::size_t d = D; d >= 1; --d) {
    for (std::size_t e = 0; e < P; ++e) {
      DpCell cell;
      if (cache_final_sums) {
        cell.hat = hat_impl(d, e, profile, costs, params, pw, [&](std::size_t c) { return cache[(d - 1) * P + c]; });
      } else {
        cell.hat = hat_impl(d, e, profile, costs, params, pw,
                            [&](std::size_t c) { return final_sum(profile, d, pw[c], params); });
      }
      if (d < D) {
        cell.check = check_impl(d, e, profile, costs, params, pw, next);
        cell.branch = cell.check.value < cell.hat.value;
      }
      row[e] = cell.value();
      out.table.cells[(d - 1) * P + e] = cell;
    }
    next.swap(row);
  }
  out.objective = out.table.at(1, 0).value();

  CascadeConfig& c = out.config;
  c.target_fpr = params.target_fpr;
  c.lambda = params.lambda;
  std::size_t e = 0;
  for (std::size_t d = 1;; ++d) {
    const DpCell& cell = out.table.at(d, e);
    const std::size_t j = cell.branch ? cell.check.exponent : cell.hat.exponent;
    const std::size_t ce = std::min(e + j, P - 1);
    c.trunk_fprs.push_back(pw[j]);
    if (!cell.branch) {
      c.depth = d;
      c.final_boundaries = profile.boundaries[d - 1];
      for (std::size_t k = 0; k < profile.regions(); ++k) {
        c.final_fprs.push_back(
            f_tilde(profile.g_final[d - 1][k], profile.h_final[d - 1][k] * pw[ce], params.budget()));
      }
      break;
    }
    c.branch_thresholds.push_back(thresholds[d - 1]);
    c.branch_fprs.push_back(f_tilde(profile.g_branch[d - 1], profile.h_branch[d - 1] * pw[ce], params.budget()));
    e = ce;
  }
  return out;
}

GridEvaluation evaluate_on_grid(const CascadeConfig& c, const DepthProfile& profile, const ModelCosts& costs,
                                const OptimizerParams& params) {
  params.validate();
  c.validate();
  GridEvaluation r;
  if (c.depth == 0) {
    r.memory_bits = params.memory_scale_bits;
    r.objective = params.lambda;
    return r;
  }
  check_shapes(profile, costs);
  require(c.depth <= profile.max_depth(), ErrorKind::kDimensionMismatch, "config deeper than the profile");
  const std::size_t P = params.grid_size;
  const auto pw = powers(params);
  const std::size_t n = params.num_keys;
  std::size_t e = 0;
  for (std::size_t d = 1; d <= c.depth; ++d) {
    const double f = c.trunk_fprs[d - 1];
    const long long jl = std::llround(std::log(f) / std::log(params.p));
    const std::size_t j = static_cast<std::size_t>(std::clamp<long long>(jl, 0, static_cast<long long>(P - 1)));
    if (std::abs(pw[j] - f) > 1e-12 * f) r.on_grid = false;
    const std::size_t ce = std::min(e + j, P - 1);
    r.memory_bits += costs.size_bits[d - 1] + s_tilde(profile.g_trunk[d - 1], f, n);
    r.reject_time_ns += costs.time_ns[d - 1] * profile.h_trunk[d - 1] * pw[ce];
    if (d < c.depth) r.memory_bits += s_tilde(profile.g_branch[d - 1], c.branch_fprs[d - 1], n);
    e = ce;
  }
  for (std::size_t k = 0; k < c.regions(); ++k) r.memory_bits += s_tilde(profile.g_final[c.depth - 1][k], c.final_fprs[k], n);
  r.objective = params.memory_weight() * r.memory_bits + params.time_weight() * r.reject_time_ns;
  return r;
}

std::string trace_to_jsonl(std::span<const TraceRecord> records) {
  std::string out;
  for (const auto& t : records) {
    nlohmann::json j = {{"alpha", t.alpha},         {"depth", t.depth},
                        {"exponent", t.exponent},   {"hat_value", t.hat_value},
                        {"hat_exponent", t.hat_exponent}, {"check_value", nullptr},
                        {"check_exponent", t.check_exponent}, {"branch", t.branch}};
    if (t.check_value) j["check_value"] = *t.check_value;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<TraceRecord> trace_from_jsonl(const std::string& text) {
  std::vector<TraceRecord> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TraceRecord t;
      t.alpha = j.at("alpha").get<double>();
      t.depth = j.at("depth").get<std::size_t>();
      t.exponent = j.at("exponent").get<std::size_t>();
      t.hat_value = j.at("hat_value").get<double>();
      t.hat_exponent = j.at("hat_exponent").get<std::size_t>();
      if (!j.at("check_value").is_null()) t.check_value = j.at("check_value").get<double>();
      t.check_exponent = j.at("check_exponent").get<std::size_t>();
      t.branch = j.at("branch").get<bool>();
      out.push_back(t);
    } catch (const nlohmann::json::exception& ex) {
      fail(ErrorKind::kParse, std::string("bad trace record: ") + ex.what());
    }
  }
  return out;
}

OptimizeResult optimize(const BoostedEnsemble& e, const SampleSet& val_keys, const SampleSet& val_nonkeys,
                        const OptimizerParams& params, bool keep_trace) {
  params.validate();
  require(!val_keys.empty() && !val_nonkeys.empty(), ErrorKind::kInvalidParameter,
          "validation keys and non-keys must be non-empty");
  OptimizeResult out;
  out.classic_objective = params.lambda;
  const std::size_t D = e.num_trees();
  const auto classic = [&] {
    out.config = CascadeConfig{};
    out.config.target_fpr = params.target_fpr;
    out.config.lambda = params.lambda;
    out.objective = out.classic_objective;
    out.profile.reset();
  };
  if (D == 0) {
    classic();
    return out;
  }

  const ModelCosts costs = ModelCosts::from(e);
  const PrefixScores ks(e, val_keys, D), ns(e, val_nonkeys, D);
  bool have = false;
  DpResult best;
  for (double alpha : params.alpha_grid) {
    const auto theta = candidate_thresholds(ns, alpha);
    DepthProfile profile = measure_profile(ks, ns, theta, params.regions, params.segments);
    DpResult r = run_dp(profile, costs, params, theta);
    out.candidates.push_back({alpha, r.objective, r.config.depth});
    if (keep_trace) {
      for (std::size_t d = 1; d <= D; ++d) {
        for (std::size_t x = 0; x < params.grid_size; ++x) {
          const auto& cell = r.table.at(d, x);
          TraceRecord t{alpha, d, x, cell.hat.value, cell.hat.exponent, std::nullopt, cell.check.exponent,
                        cell.branch};
          if (d < D) t.check_value = cell.check.value;
          out.trace.push_back(t);
        }
      }
    }
    if (!have || r.objective < best.objective || (r.objective == best.objective && alpha < out.alpha)) {
      have = true;
      best = std::move(r);
      out.alpha = alpha;
      out.profile = std::move(profile);
    }
  }
  if (best.objective >= out.classic_objective) {
    classic();
    return out;
  }
  out.config = std::move(best.config);
  out.objective = best.objective;
  return out;
}

ScalingConstants measure_scaling_constants(std::size_t n, double target_fpr, const SampleSet& val_nonkeys,
                                           std::uint64_t seed) {
  require(n >= 1, ErrorKind::kInvalidParameter, "key count must be positive");
  ScalingConstants sc;
  sc.memory_bits = static_cast<double>(theoretical_size_bits(n, target_fpr));

  BloomFilter bf(n, target_fpr, filter_seed(seed, FilterRole::kClassic, 0));
  for (std::size_t i = 0; i < n; ++i) bf.insert("scale-key-" + std::to_string(i));
  std::vector<std::string> queries;
  if (val_nonkeys.empty()) {
    for (std::size_t i = 0; i < 4096; ++i) queries.push_back("scale-query-" + std::to_string(i));
  } else {
    queries = val_nonkeys.ids();
  }
  constexpr std::size_t kWarmup = 10'000, kPerBatch = 100'000, kBatches = 5;
  std::size_t sink = 0;
  for (std::size_t i = 0; i < kWarmup; ++i) sink += bf.contains(queries[i % queries.size()]);
  std::vector<double> means;
  for (std::size_t b = 0; b < kBatches; ++b) {
    const auto t0 = now_ns();
    for (std::size_t i = 0; i < kPerBatch; ++i) sink += bf.contains(queries[(b * kPerBatch + i) % queries.size()]);
    means.push_back(static_cast<double>(now_ns() - t0) / static_cast<double>(kPerBatch));
  }
  do_not_optimize(sink);
  sc.reject_ns = std::max(median(means), 1e-3);
  return sc;
}

}  // namespace clbf
