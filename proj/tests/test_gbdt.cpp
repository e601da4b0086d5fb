#include <cmath>
#include <vector>

#include "clbf/datasets.hpp"
#include "clbf/error.hpp"
#include "clbf/gbdt.hpp"
#include "doctest.h"

using namespace clbf;

namespace {

SampleSet one_dim(std::initializer_list<double> xs) {
  SampleSet s(1);
  for (double x : xs) s.add(std::vector<double>{x}, canonical_identity(std::vector<double>{x}));
  return s;
}

}  // namespace

TEST_CASE("separable stump splits between the classes") {
  const auto keys = one_dim({1.0, 2.0, 3.0, 4.0});
  const auto nonkeys = one_dim({-1.0, -2.0, -3.0, -4.0});
  const auto e = train(keys, nonkeys, {.rounds = 1, .max_depth = 1});
  REQUIRE(e.num_trees() == 1);
  const auto& root = e.tree(0).nodes()[0];
  CHECK(root.feature == 0);
  CHECK(root.threshold == 0.0);
  CHECK(e.prefix_score(keys.row(0), 1) > e.prefix_score(nonkeys.row(0), 1));
  CHECK(e.tree_size_bytes(1) == 36);
}

TEST_CASE("tree size formula") {
  CHECK(RegressionTree().size_bytes() == 8);
  std::vector<TreeNode> stump{{.feature = 0, .threshold = 0.5, .left = 1, .right = 2}, {.value = -1}, {.value = 1}};
  CHECK(RegressionTree(stump).size_bytes() == 36);
  std::vector<TreeNode> full{{.feature = 0, .threshold = 0, .left = 1, .right = 4},
                             {.feature = 1, .threshold = 0, .left = 2, .right = 3},
                             {.value = 1},
                             {.value = 2},
                             {.feature = 1, .threshold = 0, .left = 5, .right = 6},
                             {.value = 3},
                             {.value = 4}};
  const RegressionTree t(full);
  CHECK(t.size_bytes() == 92);
  CHECK(t.depth() == 2);
  CHECK(t.predict(std::vector<double>{1.0, -1.0}) == 3);
}

TEST_CASE("prefix score of a zero leaf with zero base is one half") {
  BoostedEnsemble e({RegressionTree()}, 0.0, 0.3, 1, 1);
  CHECK(e.prefix_score(std::vector<double>{123.0}, 1) == 0.5);
  CHECK_THROWS_AS(e.prefix_score(std::vector<double>{1.0}, 0), Error);
  CHECK_THROWS_AS(e.prefix_score(std::vector<double>{1.0}, 2), Error);
  CHECK_THROWS_AS(e.tree_size_bytes(0), Error);
}

TEST_CASE("training input validation") {
  const auto keys = one_dim({1.0});
  SampleSet empty(1);
  SampleSet two_d(2);
  two_d.add(std::vector<double>{0.0, 0.0}, "a");
  CHECK_THROWS_AS(train(keys, empty, {}), Error);
  CHECK_THROWS_AS(train(keys, keys, {.rounds = 0}), Error);
  CHECK_THROWS_AS(train(keys, two_d, {}), Error);
}

TEST_CASE("scores are deterministic, incremental and inside (0,1)") {
  const auto ds = gen_separation(1.0, 600, 900, 5, 11);
  const TrainParams p{.rounds = 8, .max_depth = 3};
  const auto a = train(ds.keys, ds.nonkeys, p);
  const auto b = train(ds.keys, ds.nonkeys, p);
  REQUIRE(a.same_model(b));
  for (std::size_t i = 0; i < 50; ++i) {
    const auto x = ds.nonkeys.row(i);
    double margin = a.base_margin();
    for (std::size_t d = 1; d <= a.num_trees(); ++d) {
      margin += a.tree_output(d - 1, x);
      CHECK(margin == a.prefix_margin(x, d));
      const double s = a.prefix_score(x, d);
      CHECK(s > 0.0);
      CHECK(s < 1.0);
      CHECK(s == b.prefix_score(x, d));
    }
  }
  CHECK(sigmoid(1e6) < 1.0);
  CHECK(sigmoid(-1e6) > 0.0);
}

TEST_CASE("training loss does not increase over rounds") {
  const auto ds = gen_clusters(4, 800, 1200, 6, 5);
  const auto e = train(ds.keys, ds.nonkeys, {.rounds = 15, .max_depth = 4});
  double prev = logistic_loss(e, ds.keys, ds.nonkeys, 1);
  for (std::size_t d = 2; d <= e.num_trees(); ++d) {
    const double cur = logistic_loss(e, ds.keys, ds.nonkeys, d);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
  for (std::size_t d = 1; d <= e.num_trees(); ++d) CHECK(e.tree(d - 1).depth() <= 4);
}

TEST_CASE("random data carries no signal") {
  const auto ds = gen_random(3000, 6000, 20, 3);
  const auto sp = split(ds, 0.5, 0.5, 0.0, 3, KeySplitPolicy::kSplitKeys);
  const auto e = train(sp.train.keys, sp.train.nonkeys, {.rounds = 20, .max_depth = 3});
  const double a = auc(e, sp.val.keys, sp.val.nonkeys, e.num_trees());
  CHECK(a > 0.45);
  CHECK(a < 0.55);
}

TEST_CASE("well separated data is learned by the first tree") {
  const auto ds = gen_separation(5.0, 4000, 8000, 20, 8);
  const auto sp = split(ds, 0.5, 0.5, 0.0, 8, KeySplitPolicy::kSplitKeys);
  const auto e = train(sp.train.keys, sp.train.nonkeys, {.rounds = 3});
  CHECK(auc(e, sp.val.keys, sp.val.nonkeys, 1) > 0.99);
}

TEST_CASE("serialization round trip") {
  const auto ds = gen_separation(0.5, 300, 300, 4, 2);
  const auto e = train(ds.keys, ds.nonkeys, {.rounds = 5, .max_depth = 3});
  io::Writer w;
  e.serialize(w);
  CHECK(w.bytes().substr(0, 9) == "CLBF-GBT1");
  io::Reader r(w.bytes());
  const auto back = BoostedEnsemble::deserialize(r);
  CHECK(r.at_end());
  CHECK(back.same_model(e));
  for (std::size_t i = 0; i < 20; ++i) CHECK(back.prefix_score(ds.keys.row(i), 5) == e.prefix_score(ds.keys.row(i), 5));
}

TEST_CASE("time calibration") {
  const auto ds = gen_separation(1.0, 2000, 2000, 20, 4);
  auto stumps = train(ds.keys, ds.nonkeys, {.rounds = 6, .max_depth = 1});
  auto deep = train(ds.keys, ds.nonkeys, {.rounds = 6, .max_depth = 6});
  SampleSet probe = ds.nonkeys.subset(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  for (std::size_t i = 10; i < 1000; ++i) probe.add(ds.nonkeys.row(i), ds.nonkeys.id(i));
  const auto ts = calibrate_time(stumps, probe, {.repeats = 100});
  const auto td = calibrate_time(deep, probe, {.repeats = 100});
  REQUIRE(stumps.calibrated());
  double lo = ts[0], hi = ts[0], mean_s = 0, mean_d = 0;
  for (double t : ts) {
    CHECK(t > 0.0);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
    mean_s += t;
  }
  for (double t : td) mean_d += t;
  CHECK(hi <= 5.0 * lo);
  CHECK(mean_d >= mean_s);
}
