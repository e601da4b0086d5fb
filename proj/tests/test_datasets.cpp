#include <cmath>
#include <algorithm>
#include <set>

#include "clbf/datasets.hpp"
#include "clbf/error.hpp"
#include "doctest.h"

using namespace clbf;

namespace {

double column_mean(const SampleSet& s, std::size_t f) {
  double sum = 0;
  for (std::size_t i = 0; i < s.size(); ++i) sum += s.row(i)[f];
  return sum / static_cast<double>(s.size());
}

}  // namespace

TEST_CASE("counter rng is reproducible from (seed, position)") {
  CounterRng a(5);
  for (int i = 0; i < 10; ++i) a.next_u64();
  CounterRng b(5, 10);
  CHECK(a.next_u64() == b.next_u64());
  CounterRng c(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(c.below(7) < 7);
  }
}

TEST_CASE("random generator") {
  const auto ds = gen_random(50000, 50000, 20, 1);
  CHECK(ds.keys.size() == 50000);
  CHECK(ds.nonkeys.size() == 50000);
  for (std::size_t f = 0; f < 20; ++f) {
    const double m = 0.5 * (column_mean(ds.keys, f) + column_mean(ds.nonkeys, f));
    CHECK(m > 0.49);
    CHECK(m < 0.51);
  }
  const auto again = gen_random(50000, 50000, 20, 1);
  CHECK(again.keys == ds.keys);
  CHECK(again.nonkeys == ds.nonkeys);
  CHECK_FALSE(gen_random(10, 10, 20, 2).keys == gen_random(10, 10, 20, 1).keys);
}

TEST_CASE("separation generator") {
  const auto ds = gen_separation(5.0, 5000, 5000, 20, 9);
  for (std::size_t f = 0; f < 20; ++f) {
    CHECK(std::abs(column_mean(ds.nonkeys, f) - 5.0) < 0.1);
    CHECK(std::abs(column_mean(ds.keys, f)) < 0.1);
  }
  // Linear classifier on sum(x): keys ~ N(0, 20), non-keys ~ N(100, 20).
  std::size_t correct = 0;
  const double cut = 5.0 * 20 / 2;
  for (std::size_t i = 0; i < ds.keys.size(); ++i) {
    double s = 0;
    for (double v : ds.keys.row(i)) s += v;
    correct += s < cut;
  }
  for (std::size_t i = 0; i < ds.nonkeys.size(); ++i) {
    double s = 0;
    for (double v : ds.nonkeys.row(i)) s += v;
    correct += s >= cut;
  }
  CHECK(static_cast<double>(correct) / 10000.0 > 0.999);
  CHECK_THROWS_AS(gen_separation(-1.0, 1, 1, 2, 0), Error);
}

TEST_CASE("cluster generator splits samples equally") {
  const auto ds = gen_clusters(3, 10, 8, 2, 4);
  CHECK(ds.keys.size() == 10);
  CHECK(ds.nonkeys.size() == 8);
  CHECK(equal_split_counts(10, 3) == std::vector<std::size_t>{4, 3, 3});
  const auto big = equal_split_counts(50001, 64);
  CHECK(*std::max_element(big.begin(), big.end()) - *std::min_element(big.begin(), big.end()) <= 1);
  CHECK_THROWS_AS(gen_clusters(0, 1, 1, 2, 0), Error);
  const auto one = gen_clusters(1, 2000, 2000, 20, 12);
  // Expected center distance in 20-D is about 28; one cluster each is trivially separable.
  std::vector<double> kc(20), nc(20);
  for (std::size_t f = 0; f < 20; ++f) {
    kc[f] = column_mean(one.keys, f);
    nc[f] = column_mean(one.nonkeys, f);
  }
  double d2 = 0;
  for (std::size_t f = 0; f < 20; ++f) d2 += (kc[f] - nc[f]) * (kc[f] - nc[f]);
  CHECK(std::sqrt(d2) > 10.0);
}

TEST_CASE("csv parsing") {
  const auto ds = parse_csv("a,b,label\n1,2,1\n3,4,0\n5,6.5,0\n");
  CHECK(ds.keys.size() == 1);
  CHECK(ds.nonkeys.size() == 2);
  CHECK(ds.nonkeys.row(1)[1] == 6.5);
  CHECK(ds.keys.id(0) == "1,2");

  const auto custom = parse_csv("cls,x\nbad,1\ngood,2\n", "cls", "bad");
  CHECK(custom.keys.size() == 1);
  CHECK(custom.keys.row(0)[0] == 1.0);

  try {
    parse_csv("a,b\n1,2\n");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParse);
    CHECK(std::string(e.what()).find("label") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_csv("a,label\n1,1\n1,0\n"), Error);
  try {
    parse_csv("a,b,label\n1,2,1\n3,x,0\n");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 3, column 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_csv("a,b,label\n1,2\n"), Error);
}

TEST_CASE("csv writing reloads bit-exactly") {
  const auto ds = gen_separation(1.0, 30, 40, 3, 1);
  const auto back = parse_csv(to_csv(ds));
  CHECK(back.keys == ds.keys);
  CHECK(back.nonkeys == ds.nonkeys);
}

TEST_CASE("split ratios and key policy") {
  const auto ds = gen_random(50, 1000, 2, 3);
  const auto sp = split(ds, 0.8, 0.1, 0.1, 17);
  CHECK(sp.train.nonkeys.size() == 800);
  CHECK(sp.val.nonkeys.size() == 100);
  CHECK(sp.test.nonkeys.size() == 100);
  CHECK(sp.train.keys.size() == 50);
  CHECK(sp.val.keys.size() == 50);
  CHECK(sp.test.keys.empty());
  std::set<std::string> seen;
  for (const auto* s : {&sp.train.nonkeys, &sp.val.nonkeys, &sp.test.nonkeys}) {
    for (const auto& id : s->ids()) CHECK(seen.insert(id).second);
  }
  const auto again = split(ds, 0.8, 0.1, 0.1, 17);
  CHECK(again.val.nonkeys == sp.val.nonkeys);
  CHECK_THROWS_AS(split(ds, 0.8, 0.3, 0.1, 1), Error);

  const auto odd = split(gen_random(5, 333, 2, 1), 0.8, 0.1, 0.1, 2, KeySplitPolicy::kSplitKeys);
  CHECK(std::abs(static_cast<double>(odd.train.nonkeys.size()) - 266.4) <= 1.0);
  CHECK(std::abs(static_cast<double>(odd.val.nonkeys.size()) - 33.3) <= 1.0);
  CHECK(odd.train.keys.size() + odd.val.keys.size() + odd.test.keys.size() == 5);
}

TEST_CASE("key and non-key identities are disjoint") {
  const auto ds = gen_clusters(8, 500, 500, 20, 1);
  CHECK_NOTHROW(check_disjoint(ds));
  LabeledDataset bad{SampleSet(1), SampleSet(1), 0};
  bad.keys.add(std::vector<double>{1.0}, "same");
  bad.nonkeys.add(std::vector<double>{2.0}, "same");
  CHECK_THROWS_AS(check_disjoint(bad), Error);
}
