#include <cmath>
#include <memory>
#include <set>

#include "clbf/cascade.hpp"
#include "clbf/datasets.hpp"
#include "clbf/error.hpp"
#include "clbf/optimizer.hpp"
#include "doctest.h"

using namespace clbf;

namespace {

struct Fixture {
  DatasetSplit sp;
  std::shared_ptr<const BoostedEnsemble> model;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    const auto ds = gen_separation(1.0, 3000, 12000, 20, 21);
    x.sp = split(ds, 0.4, 0.2, 0.4, 21, KeySplitPolicy::kAllKeysTrainAndVal);
    x.model = std::make_shared<const BoostedEnsemble>(
        train(x.sp.train.keys, x.sp.train.nonkeys, {.rounds = 8, .max_depth = 3}));
    return x;
  }();
  return f;
}

// One-depth profile with every sample reaching TBF_1 and one final region.
DepthProfile single_region_profile() {
  DepthProfile p;
  p.g_trunk = {1.0};
  p.h_trunk = {1.0};
  p.g_branch = {0.0};
  p.h_branch = {0.0};
  p.boundaries = {{0.0, 1.0}};
  p.g_final = {{1.0}};
  p.h_final = {{1.0}};
  return p;
}

CascadeConfig three_level_config(const DepthProfile& p) {
  CascadeConfig c;
  c.depth = 3;
  c.branch_thresholds = {p.thresholds[0], p.thresholds[1]};
  c.trunk_fprs = {0.5, 0.25, 1.0};
  c.branch_fprs = {0.02, 0.05};
  c.final_boundaries = p.boundaries[2];
  for (std::size_t k = 0; k < p.regions(); ++k) c.final_fprs.push_back(std::min(1.0, 0.01 + 0.1 * k));
  c.target_fpr = 0.01;
  return c;
}

}  // namespace

TEST_CASE("terminal rate formula") {
  CHECK(f_tilde(0.02, 0.01, 0.001) == doctest::Approx(0.002).epsilon(1e-12));
  CHECK(f_tilde(0.5, 0.0001, 0.01) == 1.0);
  CHECK(f_tilde(0.3, 0.3, 0.004) == doctest::Approx(0.004).epsilon(1e-12));
  CHECK(f_tilde(0.3, 0.0, 0.004) == 1.0);
  CHECK(f_tilde(0.0, 0.2, 0.004) == 0.0);
}

TEST_CASE("analytic filter size") {
  // log2(e) * 500 * log2(100), evaluated in long double.
  const long double want = 500.0L * std::log2(100.0L) / std::log(2.0L);
  CHECK(s_tilde(0.5, 0.01, 1000) == doctest::Approx(static_cast<double>(want)).epsilon(1e-12));
  CHECK(s_tilde(0.5, 0.01, 1000) == doctest::Approx(4792.53).epsilon(1e-6));
  CHECK(s_tilde(0.37, 1.0, 1000) == 0.0);
  CHECK(s_tilde(0.0, 0.01, 1000) == 0.0);
  for (double F : {0.1, 0.01, 0.001}) {
    const double s = s_tilde(1.0, F, 100000);
    CHECK(static_cast<double>(theoretical_size_bits(100000, F)) - s >= 0.0);
    CHECK(static_cast<double>(theoretical_size_bits(100000, F)) - s < 1.0);
  }
}

TEST_CASE("final region lookup is lower-inclusive") {
  const std::vector<double> t = {0.0, 0.5, 1.0};
  CHECK(final_region(t, 0.2) == 0);
  CHECK(final_region(t, 0.5) == 1);
  CHECK(final_region(t, 1.0) == 1);
  CHECK(final_region(t, 0.0) == 0);
  const std::vector<double> one = {0.0, 1.0};
  CHECK(final_region(one, 0.99) == 0);
  const std::vector<double> four = {0.0, 0.1, 0.2, 0.7, 1.0};
  CHECK(final_region(four, 0.1999) == 1);
  CHECK(final_region(four, 0.7) == 3);
}

TEST_CASE("analytic memory of a one-level cascade") {
  const auto p = single_region_profile();
  CascadeConfig c;
  c.depth = 1;
  c.trunk_fprs = {0.5};
  c.final_boundaries = {0.0, 1.0};
  c.final_fprs = {0.002};
  ModelCosts costs{{8.0 * 92}, {100.0}};
  const long double c0 = 1.0L / std::log(2.0L);
  const long double want = c0 * 1000 + c0 * 1000 * std::log2(500.0L) + 8.0L * 92;
  CHECK(analytic_memory_bits(c, costs, p, 1000) == doctest::Approx(static_cast<double>(want)).epsilon(1e-12));
  CHECK(analytic_memory_bits(c, costs, p, 1000) == doctest::Approx(14377.588 + 736).epsilon(1e-7));

  CascadeConfig zero;
  zero.target_fpr = 0.01;
  CHECK(analytic_memory_bits(zero, costs, p, 1000) == doctest::Approx(s_tilde(1.0, 0.01, 1000)));
  CHECK(analytic_reject_time_ns(zero, costs, p) == 0.0);
  CHECK(analytic_fpr(zero, p) == 0.01);
}

TEST_CASE("analytic reject time") {
  const auto p = single_region_profile();
  CascadeConfig c;
  c.depth = 1;
  c.trunk_fprs = {0.5};
  c.final_boundaries = {0.0, 1.0};
  c.final_fprs = {0.02};
  ModelCosts costs{{0.0}, {100.0}};
  CHECK(analytic_reject_time_ns(c, costs, p) == doctest::Approx(50.0));
  CHECK(expected_model_evaluations(c, p) == doctest::Approx(0.5));
  c.trunk_fprs = {1.0};
  CHECK(analytic_reject_time_ns(c, costs, p) == doctest::Approx(100.0));
}

TEST_CASE("analytic fpr spends exactly the budget when no terminal clamps") {
  DepthProfile p;
  p.g_trunk = {1.0, 0.7};
  p.h_trunk = {1.0, 0.9};
  p.g_branch = {0.3, 0.0};
  p.h_branch = {0.1, 0.0};
  p.boundaries = {{0.0, 0.5, 1.0}, {0.0, 0.4, 1.0}};
  p.g_final = {{0.2, 0.8}, {0.2, 0.5}};
  p.h_final = {{0.6, 0.4}, {0.7, 0.2}};
  const double F = 0.001, f1 = 0.5, f2 = 0.25;
  CascadeConfig c;
  c.depth = 2;
  c.branch_thresholds = {0.9};
  c.trunk_fprs = {f1, f2};
  c.branch_fprs = {f_tilde(0.3, 0.1 * f1, F)};
  c.final_boundaries = p.boundaries[1];
  c.final_fprs = {f_tilde(0.2, 0.7 * f1 * f2, F), f_tilde(0.5, 0.2 * f1 * f2, F)};
  c.target_fpr = F;
  CHECK(analytic_fpr(c, p) == doctest::Approx(F).epsilon(1e-12));
  // Clamping one terminal lowers the total.
  c.final_fprs[1] = 1.0;
  c.final_fprs[0] = f_tilde(0.2, 0.7 * f1 * f2, F);
  p.g_final[1][1] = 0.5;
  p.h_final[1][1] = 1e-6;
  CHECK(analytic_fpr(c, p) < F);
}

TEST_CASE("config validation") {
  CascadeConfig c;
  CHECK_NOTHROW(c.validate());
  c.trunk_fprs = {0.5};
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.depth = 1;
  c.trunk_fprs = {0.5};
  c.final_boundaries = {0.0, 0.6, 0.6, 1.0};
  c.final_fprs = {0.1, 0.1, 0.1};
  CHECK_THROWS_AS(c.validate(), Error);
  c.final_boundaries = {0.0, 0.6, 0.7, 1.0};
  CHECK_NOTHROW(c.validate());
  c.trunk_fprs = {1.5};
  CHECK_THROWS_AS(c.validate(), Error);
  c.trunk_fprs = {0.0};
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("depth zero is one classical filter") {
  const auto& f = fixture();
  CascadeConfig c;
  c.target_fpr = 0.01;
  const auto clbf = Clbf::build(c, f.model, f.sp.val.keys, 5);
  BloomFilter ref(f.sp.val.keys.size(), 0.01, filter_seed(5, FilterRole::kClassic, 0));
  for (const auto& id : f.sp.val.keys.ids()) ref.insert(id);
  CHECK(clbf.classic_filter() == ref);
  CHECK(clbf.model_bytes() == 0);
  CHECK(clbf.filter_bits() == theoretical_size_bits(f.sp.val.keys.size(), 0.01));
  for (std::size_t i = 0; i < f.sp.test.nonkeys.size(); ++i) {
    QueryStats st;
    CHECK(clbf.contains(f.sp.test.nonkeys.row(i), f.sp.test.nonkeys.id(i), &st) ==
          ref.contains(f.sp.test.nonkeys.id(i)));
    CHECK(st.model_evaluations == 0);
  }
}

TEST_CASE("build sizes filters from routed counts and stores every key") {
  const auto& f = fixture();
  const auto& keys = f.sp.val.keys;
  const auto ns = PrefixScores(*f.model, f.sp.val.nonkeys, 3);
  const auto theta = candidate_thresholds(ns, 0.05);
  const auto profile = measure_profile(*f.model, theta, keys, f.sp.val.nonkeys, 3, 20);
  const auto cfg = three_level_config(profile);
  const auto c = Clbf::build(cfg, f.model, keys, 9);

  std::vector<std::size_t> trunk(3), branch(2), fin(3);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto r = c.route(keys.row(i));
    for (std::size_t d = 0; d < r.trunks; ++d) ++trunk[d];
    ++(r.branched ? branch : fin)[r.terminal];
    const double s1 = f.model->prefix_score(keys.row(i), 1);
    if (s1 >= cfg.branch_thresholds[0]) {
      CHECK(r.trunks == 1);
      CHECK(r.branched);
      CHECK(r.terminal == 0);
    }
  }
  for (std::size_t d = 0; d < 3; ++d) {
    CHECK(c.trunk_filters()[d].capacity() == trunk[d]);
    CHECK(trunk[d] == profile.key_trunk[d]);
  }
  for (std::size_t d = 0; d < 2; ++d) CHECK(c.branch_filters()[d].capacity() == branch[d]);
  for (std::size_t k = 0; k < 3; ++k) CHECK(c.final_filters()[k].capacity() == fin[k]);
  CHECK(c.trunk_filters()[2].always_found());

  for (std::size_t i = 0; i < keys.size(); ++i) REQUIRE(c.contains(keys.row(i), keys.id(i)));
}

TEST_CASE("a non-key rejected by the first trunk costs no model evaluation") {
  const auto& f = fixture();
  const auto theta = candidate_thresholds(PrefixScores(*f.model, f.sp.val.nonkeys, 3), 0.05);
  const auto profile = measure_profile(*f.model, theta, f.sp.val.keys, f.sp.val.nonkeys, 3, 20);
  const auto c = Clbf::build(three_level_config(profile), f.model, f.sp.val.keys, 9);
  std::size_t rejected_first = 0;
  for (std::size_t i = 0; i < f.sp.test.nonkeys.size(); ++i) {
    const auto& id = f.sp.test.nonkeys.id(i);
    if (c.trunk_filters()[0].contains(id)) continue;
    QueryStats st;
    CHECK_FALSE(c.contains(f.sp.test.nonkeys.row(i), id, &st));
    CHECK(st.model_evaluations == 0);
    ++rejected_first;
  }
  CHECK(rejected_first > 1000);
}

TEST_CASE("model evaluations and fpr match the analytic routing factors") {
  const auto& f = fixture();
  const auto& q = f.sp.test.nonkeys;
  const auto theta = candidate_thresholds(PrefixScores(*f.model, f.sp.val.nonkeys, 3), 0.05);
  // Profile of the query set itself, so the only randomness left is the
  // filters' hashing.
  const auto profile = measure_profile(*f.model, theta, f.sp.val.keys, q, 3, 20);
  auto cfg = three_level_config(profile);
  cfg.final_boundaries = profile.boundaries[2];
  const auto c = Clbf::build(cfg, f.model, f.sp.val.keys, 13);
  std::size_t evals = 0, fp = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    QueryStats st;
    fp += c.contains(q.row(i), q.id(i), &st);
    evals += st.model_evaluations;
  }
  const double n = static_cast<double>(q.size());
  const double want = expected_model_evaluations(cfg, profile);
  // Evaluation count per query is at most 3; its variance is below 9/4.
  CHECK(std::abs(evals / n - want) < 4.0 * 1.5 / std::sqrt(n));
  const double fpr = analytic_fpr(cfg, profile);
  CHECK(std::abs(fp / n - fpr) < 4.0 * std::sqrt(fpr * (1 - fpr) / n) + 1e-3);
}

TEST_CASE("keys inserted after build are found") {
  const auto& f = fixture();
  const auto theta = candidate_thresholds(PrefixScores(*f.model, f.sp.val.nonkeys, 3), 0.05);
  const auto profile = measure_profile(*f.model, theta, f.sp.val.keys, f.sp.val.nonkeys, 3, 20);
  auto c = Clbf::build(three_level_config(profile), f.model, f.sp.val.keys, 9);
  const auto& extra = f.sp.test.nonkeys;
  for (std::size_t i = 0; i < 200; ++i) c.insert_key(extra.row(i), extra.id(i));
  CHECK(c.key_count() == f.sp.val.keys.size() + 200);
  for (std::size_t i = 0; i < 200; ++i) CHECK(c.contains(extra.row(i), extra.id(i)));
}

TEST_CASE("serialization round trip preserves answers") {
  const auto& f = fixture();
  const auto theta = candidate_thresholds(PrefixScores(*f.model, f.sp.val.nonkeys, 3), 0.02);
  auto profile = measure_profile(*f.model, theta, f.sp.val.keys, f.sp.val.nonkeys, 3, 20);
  auto c = Clbf::build(three_level_config(profile), f.model, f.sp.val.keys, 9);
  c.set_profile(profile);
  const auto bytes = c.serialize();
  CHECK(bytes.substr(0, 7) == "CLBF-V1");
  const auto back = Clbf::deserialize(bytes);
  CHECK(back.serialize() == bytes);
  CHECK(back.config() == c.config());
  CHECK(back.ensemble().num_trees() == 3);
  CHECK(back.model_bytes() == c.model_bytes());
  CHECK(back.filter_bits() == c.filter_bits());
  REQUIRE(back.profile().has_value());
  CHECK(back.profile()->g_final == profile.g_final);
  for (std::size_t i = 0; i < f.sp.test.nonkeys.size(); ++i) {
    const auto x = f.sp.test.nonkeys.row(i);
    const auto& id = f.sp.test.nonkeys.id(i);
    REQUIRE(back.contains(x, id) == c.contains(x, id));
  }
  CHECK_THROWS_AS(Clbf::deserialize(bytes.substr(0, bytes.size() - 3)), Error);
  CHECK_THROWS_AS(Clbf::deserialize("CLBF-V2" + bytes.substr(7)), Error);
}

TEST_CASE("build rejects configs deeper than the model") {
  const auto& f = fixture();
  CascadeConfig c;
  c.depth = 9;
  c.branch_thresholds.assign(8, 0.5);
  c.trunk_fprs.assign(9, 0.5);
  c.branch_fprs.assign(8, 0.1);
  c.final_boundaries = {0.0, 1.0};
  c.final_fprs = {0.1};
  CHECK_THROWS_AS(Clbf::build(c, f.model, f.sp.val.keys, 1), Error);
}

TEST_CASE("filter seeds differ across roles and indices") {
  std::set<std::uint64_t> seen;
  for (auto role : {FilterRole::kTrunk, FilterRole::kBranch, FilterRole::kFinal, FilterRole::kClassic}) {
    for (std::size_t i = 0; i < 50; ++i) seen.insert(filter_seed(77, role, i));
  }
  CHECK(seen.size() == 200);
  CHECK(filter_seed(77, FilterRole::kFinal, 3) == filter_seed(77, FilterRole::kFinal, 3));
}
