#include <cmath>
#include <string>

#include "clbf/bench.hpp"
#include "clbf/error.hpp"
#include "doctest.h"

using namespace clbf;

namespace {

const Experiment& experiment() {
  static const Experiment ex = [] {
    ExperimentOptions o;
    o.train = {.rounds = 8, .max_depth = 4};
    o.seed = 5;
    return prepare_experiment(gen_separation(1.0, 3000, 12000, 20, 5), o);
  }();
  return ex;
}

StructureSpec spec(StructureKind kind) {
  StructureSpec s;
  s.kind = kind;
  s.F = 0.02;
  s.depth = kind == StructureKind::kClbf || kind == StructureKind::kClassic ? 0 : 4;
  s.seed = 9;
  return s;
}

const ScalingConstants kScaling{40000.0, 80.0};

}  // namespace

TEST_CASE("structure kind names") {
  for (auto k : {StructureKind::kClassic, StructureKind::kSandwiched, StructureKind::kPlbf, StructureKind::kClbf}) {
    CHECK(parse_structure_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_structure_kind("cuckoo"), Error);
}

TEST_CASE("report csv round trip") {
  BenchReport a;
  a.structure = "clbf";
  a.F = 0.001;
  a.lambda = 0.3;
  a.rounds = 100;
  a.depth = 7;
  a.K = 5;
  a.max_depth = 6;
  a.model_bytes = 1234;
  a.filter_bytes = 99;
  a.total_bytes = 1333;
  a.fpr = 0.00097;
  a.fpr_stderr = 1.0 / 3.0;
  a.reject_ns_model = 12.5;
  a.reject_ns_e2e = 40.25;
  a.accept_ns = 0.1 + 0.2;
  a.build_ms = 3.0;
  a.optimize_ms = 1e-7;
  BenchReport b = a;
  b.structure = "plbf";
  b.depth = 100;
  const std::vector<BenchReport> rows = {a, b};
  const auto text = reports_to_csv(rows);
  CHECK(text.substr(0, text.find('\n')) == report_csv_header());
  CHECK(parse_reports_csv(text) == rows);
  CHECK_THROWS_AS(parse_reports_csv("nope\n"), Error);
  CHECK_THROWS_AS(parse_reports_csv(report_csv_header() + "\nclbf,1,2\n"), Error);
  CHECK_THROWS_AS(parse_reports_csv(report_csv_header() + "\n" + text.substr(text.find('\n') + 1).replace(5, 1, "x")),
                  Error);
}

TEST_CASE("generator descriptions") {
  const auto g = parse_generator_spec("clusters:c=8,keys=10,nonkeys=30,dim=3,seed=4");
  CHECK(g.kind == "clusters");
  CHECK(g.clusters == 8);
  CHECK(g.keys == 10);
  CHECK(g.nonkeys == 30);
  CHECK(g.dim == 3);
  CHECK(g.seed == 4);
  const auto ds = generate(g);
  CHECK(ds.keys.size() == 10);
  CHECK(ds.nonkeys.size() == 30);
  CHECK(ds.keys.dim() == 3);
  CHECK(parse_generator_spec("separation:delta=2.5").delta == 2.5);
  CHECK(parse_generator_spec("random").kind == "random");
  CHECK_THROWS_AS(parse_generator_spec("gauss"), Error);
  CHECK_THROWS_AS(parse_generator_spec("random:keys"), Error);
  CHECK_THROWS_AS(parse_generator_spec("random:keys=ten"), Error);
  CHECK_THROWS_AS(parse_generator_spec("random:colour=3"), Error);
}

TEST_CASE("every structure round-trips and keeps its keys") {
  const auto& ex = experiment();
  for (auto k : {StructureKind::kClassic, StructureKind::kSandwiched, StructureKind::kPlbf, StructureKind::kClbf}) {
    CAPTURE(to_string(k));
    const auto b = build_structure(ex, spec(k), kScaling);
    CHECK(b.structure.kind() == k);
    CHECK(b.optimized.has_value() == (k == StructureKind::kClbf));
    const auto back = AnyStructure::deserialize(b.structure.serialize());
    CHECK(back.kind() == k);
    CHECK(back.serialize() == b.structure.serialize());
    CHECK(back.filter_bits() == b.structure.filter_bits());
    CHECK(back.model_bytes() == b.structure.model_bytes());

    const auto m = measure(back, ex.keys(), ex.split.test.nonkeys, std::nullopt);
    CHECK(m.keys == ex.keys().size());
    CHECK(m.false_negatives == 0);
    CHECK(m.nonkeys == ex.split.test.nonkeys.size());
    std::size_t fp = 0;
    for (std::size_t i = 0; i < ex.split.test.nonkeys.size(); ++i) {
      fp += b.structure.contains(ex.split.test.nonkeys.row(i), ex.split.test.nonkeys.id(i));
    }
    CHECK(m.false_positives == fp);
    CHECK(m.reject_ns_e2e == 0.0);
    if (k == StructureKind::kClassic) CHECK(m.mean_model_evaluations == 0.0);
    if (k == StructureKind::kPlbf) CHECK(m.mean_model_evaluations == 4.0);

    const auto r = make_report(back, m, 0.02, 1.0, 8, 4, 1.0, 2.0);
    CHECK(r.structure == to_string(k));
    CHECK(r.total_bytes == r.model_bytes + r.filter_bytes);
    CHECK(r.fpr == doctest::Approx(static_cast<double>(fp) / static_cast<double>(m.nonkeys)));
    CHECK(r.fpr_stderr == doctest::Approx(std::sqrt(r.fpr * (1 - r.fpr) / static_cast<double>(m.nonkeys))));
  }
  CHECK_THROWS_AS(AnyStructure::deserialize("NOTHING-V9"), Error);
}

TEST_CASE("timed measurement reports positive times") {
  const auto& ex = experiment();
  const auto b = build_structure(ex, spec(StructureKind::kPlbf), kScaling);
  const auto m = measure(b.structure, ex.keys(), ex.split.test.nonkeys, TimingOptions{3, 2000, 200});
  CHECK(m.reject_ns_e2e > 0.0);
  CHECK(m.reject_ns_model > 0.0);
  CHECK(m.accept_ns > 0.0);
}

TEST_CASE("svg chart") {
  const std::vector<SvgSeries> s = {{"a<b", {{0.001, 10.0}, {0.01, 5.0}}}, {"c", {{0.1, 1.0}}}};
  const auto svg = svg_chart("t & u", "x", "y", s, true, false);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("a&lt;b") != std::string::npos);
  CHECK(svg.find("t &amp; u") != std::string::npos);
  CHECK(svg.find("a<b") == std::string::npos);
}
