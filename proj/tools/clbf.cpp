// clbf: build, benchmark and inspect cascaded learned Bloom filters.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "clbf/bench.hpp"
#include "clbf/binary_io.hpp"
#include "clbf/error.hpp"

using namespace clbf;
using nlohmann::json;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitInvalid = 3;
constexpr int kExitIo = 4;
constexpr int kExitFalseNegative = 5;

struct FalseNegatives : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || end != item.c_str() + item.size()) {
      fail(ErrorKind::kParse, std::string("bad number in ") + what + ": '" + item + "'");
    }
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    if (comma > pos) out.push_back(text.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

// Options shared by every command that trains a model.
struct DataOptions {
  std::string data, gen;
  std::string label_column = "label", key_label = "1";
  std::string split = "0.8,0.1,0.1";
  int rounds = 100, max_depth = 6;
  double learning_rate = 0.3;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--data", data, "Labelled CSV (f0..f{d-1},label)");
    app->add_option("--gen", gen, "Generator, e.g. separation:delta=1,keys=20000,nonkeys=50000");
    app->add_option("--label-column", label_column, "Label column name")->capture_default_str();
    app->add_option("--key-label", key_label, "Label value marking keys")->capture_default_str();
    app->add_option("--split", split, "Non-key train,validation,test fractions")->capture_default_str();
    app->add_option("--rounds", rounds, "Boosting rounds (maximum cascade depth)")->capture_default_str();
    app->add_option("--max-depth", max_depth, "Depth of each tree")->capture_default_str();
    app->add_option("--learning-rate", learning_rate, "Shrinkage")->capture_default_str();
    app->add_option("--seed", seed, "Run seed (CLBF_SEED overrides)")->capture_default_str();
  }

  std::uint64_t effective_seed() const {
    if (const char* env = std::getenv("CLBF_SEED")) {
      char* end = nullptr;
      const auto v = std::strtoull(env, &end, 10);
      require(*env && *end == '\0', ErrorKind::kParse, "CLBF_SEED must be an unsigned integer");
      return v;
    }
    return seed;
  }

  LabeledDataset load() const {
    require(data.empty() != gen.empty(), ErrorKind::kInvalidParameter, "give exactly one of --data and --gen");
    if (!data.empty()) return load_csv(data, label_column, key_label);
    auto g = parse_generator_spec(gen);
    if (gen.find("seed=") == std::string::npos) g.seed = effective_seed();
    return generate(g);
  }

  Experiment prepare() const {
    const auto ds = load();
    const auto f = parse_list(split, "--split");
    require(f.size() == 3, ErrorKind::kInvalidParameter, "--split needs three fractions");
    ExperimentOptions o;
    o.train = {.rounds = rounds, .max_depth = max_depth, .learning_rate = learning_rate, .seed = effective_seed()};
    o.train_frac = f[0];
    o.val_frac = f[1];
    o.test_frac = f[2];
    o.seed = effective_seed();
    return prepare_experiment(ds, o);
  }
};

struct StructureOptions {
  double F = 0.01, lambda = 1.0, p = 0.5;
  std::size_t K = 5, P = 20, segments = 100, depth = 0;
  std::string alpha_grid;

  void add(CLI::App* app, bool with_f, bool with_lambda) {
    if (with_f) app->add_option("--F", F, "Target false-positive rate")->capture_default_str();
    if (with_lambda) app->add_option("--lambda", lambda, "Memory weight in [0,1]")->capture_default_str();
    app->add_option("--K", K, "Final filters / PLBF regions")->capture_default_str();
    app->add_option("--p", p, "Trunk-rate grid base")->capture_default_str();
    app->add_option("--P", P, "Trunk-rate grid size")->capture_default_str();
    app->add_option("--segments", segments, "Histogram bins for region partitioning")->capture_default_str();
    app->add_option("--alpha-grid", alpha_grid, "Comma-separated branch quantiles");
  }

  StructureSpec spec(StructureKind kind, std::uint64_t seed) const {
    StructureSpec s;
    s.kind = kind;
    s.F = F;
    s.lambda = lambda;
    s.K = K;
    s.P = P;
    s.p = p;
    s.segments = segments;
    s.depth = depth;
    s.seed = seed;
    if (!alpha_grid.empty()) s.alpha_grid = parse_list(alpha_grid, "--alpha-grid");
    return s;
  }
};

struct TimingCli {
  std::size_t repeats = 5, queries = 100'000, warmup = 10'000;
  bool skip = false;
  void add(CLI::App* app) {
    app->add_option("--repeats", repeats, "Timing batches (median reported)")->capture_default_str();
    app->add_option("--queries", queries, "Queries per timing batch")->capture_default_str();
    app->add_option("--warmup", warmup, "Discarded warm-up queries")->capture_default_str();
    app->add_flag("--no-timing", skip, "Count answers only");
  }
  std::optional<TimingOptions> options() const {
    if (skip) return std::nullopt;
    require(repeats >= 1 && queries >= 1, ErrorKind::kInvalidParameter, "timing needs at least one query and batch");
    return TimingOptions{repeats, queries, warmup};
  }
};

json summary_json(const Experiment& ex, const BuildOutcome& b, const StructureSpec& spec) {
  const AnyStructure& s = b.structure;
  json j;
  j["structure"] = to_string(s.kind());
  j["F"] = spec.F;
  j["keys"] = ex.keys().size();
  j["rounds"] = ex.model->num_trees();
  j["max_depth"] = ex.train_params.max_depth;
  j["depth"] = s.depth();
  j["K"] = s.regions();
  j["model_bytes"] = s.model_bytes();
  j["filter_bytes"] = (s.filter_bits() + 7) / 8;
  j["total_bytes"] = s.model_bytes() + (s.filter_bits() + 7) / 8;
  j["train_ms"] = ex.train_ms;
  j["build_ms"] = b.build_ms;
  j["tree_time_ns"] = ex.model->tree_time_ns();
  if (const Clbf* c = s.as_clbf()) {
    const auto& o = *b.optimized;
    j["lambda"] = spec.lambda;
    j["p"] = spec.p;
    j["P"] = spec.P;
    j["alpha"] = o.alpha;
    j["objective"] = o.objective;
    j["classic_objective"] = o.classic_objective;
    j["M_BF_bits"] = b.scaling.memory_bits;
    j["R_BF_ns"] = b.scaling.reject_ns;
    j["optimize_ms"] = b.optimize_ms;
    json cands = json::array();
    for (const auto& a : o.candidates) cands.push_back({{"alpha", a.alpha}, {"objective", a.objective}, {"depth", a.depth}});
    j["candidates"] = cands;
    if (o.profile) {
      const auto costs = ModelCosts::from(*ex.model);
      j["analytic_fpr"] = analytic_fpr(c->config(), *o.profile);
      j["analytic_memory_bits"] = analytic_memory_bits(c->config(), costs, *o.profile, c->key_count());
      j["analytic_reject_ns"] = analytic_reject_time_ns(c->config(), costs, *o.profile);
      j["expected_model_evaluations"] = expected_model_evaluations(c->config(), *o.profile);
    } else {
      j["analytic_fpr"] = spec.F;
      j["analytic_reject_ns"] = 0.0;
      j["expected_model_evaluations"] = 0.0;
    }
  } else if (const Plbf* p = s.as_plbf()) {
    j["analytic_fpr"] = p->analytic_fpr();
    j["boundaries"] = p->boundaries();
    j["fprs"] = p->fprs();
  } else if (const Sandwiched* w = s.as_sandwiched()) {
    j["analytic_fpr"] = w->analytic_fpr();
    j["analytic_memory_bits"] = w->analytic_memory_bits();
    j["pre_fpr"] = w->params().pre_fpr;
    j["threshold"] = w->params().threshold;
    j["backup_fpr"] = w->params().backup_fpr;
  }
  return j;
}

std::optional<json> read_sidecar(const std::string& path) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, path + ": " + e.what());
  }
}

// Stored keys plus held-out non-keys, the input `bench` expects.
void write_test_csv(const Experiment& ex, const std::string& path) {
  LabeledDataset t;
  t.keys = ex.keys();
  t.nonkeys = ex.split.test.nonkeys;
  write_csv(t, path);
}

// ------------------------------------------------------------ commands

struct BuildCmd {
  DataOptions data;
  StructureOptions st;
  std::string structure = "clbf", out, test_out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("build", "Train, optimize and serialize a filter");
    data.add(c);
    st.add(c, true, true);
    c->add_option("--structure", structure, "clbf | plbf | sandwiched | classic")->capture_default_str();
    c->add_option("--depth", st.depth, "Model depth for plbf/sandwiched (0 = all trees)")->capture_default_str();
    c->add_option("--out", out, "Output filter file")->required();
    c->add_option("--test-out", test_out, "Also write stored keys + held-out non-keys as CSV");
    c->callback([this] { run(); });
  }

  void run() {
    const auto kind = parse_structure_kind(structure);
    const Experiment ex = data.prepare();
    const auto spec = st.spec(kind, data.effective_seed());
    const BuildOutcome b = build_structure(ex, spec, std::nullopt, true);
    io::write_file(out, b.structure.serialize());
    const json summary = summary_json(ex, b, spec);
    io::write_file(out + ".summary.json", summary.dump(2) + "\n");
    if (b.optimized) io::write_file(out + ".trace.jsonl", trace_to_jsonl(b.optimized->trace));
    if (!test_out.empty()) write_test_csv(ex, test_out);
    std::cout << summary.dump(2) << "\n";
  }
};

struct BenchCmd {
  std::string filter, test, out, label_column = "label", key_label = "1";
  TimingCli timing;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("bench", "Measure FPR, memory and query times of a filter file");
    c->add_option("filter", filter, "Filter file written by build")->required();
    c->add_option("--test", test, "CSV with stored keys (label 1) and held-out non-keys")->required();
    c->add_option("--label-column", label_column)->capture_default_str();
    c->add_option("--key-label", key_label)->capture_default_str();
    c->add_option("--out", out, "CSV output (stdout when omitted)");
    timing.add(c);
    c->callback([this] { run(); });
  }

  void run() {
    const AnyStructure s = AnyStructure::deserialize(io::read_file(filter));
    const LabeledDataset ds = load_csv(test, label_column, key_label);
    const Measurement m = measure(s, ds.keys, ds.nonkeys, timing.options());
    if (m.false_negatives > 0) {
      throw FalseNegatives(std::to_string(m.false_negatives) + " of " + std::to_string(m.keys) +
                           " stored keys answered NotFound");
    }
    double F = 0.0, lambda = 1.0;
    if (const auto* c = s.as_clbf()) {
      F = c->config().target_fpr;
      lambda = c->config().lambda;
    } else if (const auto* p = s.as_plbf()) {
      F = p->target_fpr();
    } else if (const auto* w = s.as_sandwiched()) {
      F = w->target_fpr();
    } else {
      F = s.as_classic()->target_fpr();
    }
    std::size_t rounds = s.depth();
    int max_depth = s.ensemble() ? s.ensemble()->max_depth() : 0;
    double build_ms = 0.0, optimize_ms = 0.0;
    if (const auto side = read_sidecar(filter + ".summary.json")) {
      rounds = side->value("rounds", rounds);
      max_depth = side->value("max_depth", max_depth);
      build_ms = side->value("build_ms", 0.0);
      optimize_ms = side->value("optimize_ms", 0.0);
    }
    const std::vector<BenchReport> rows = {make_report(s, m, F, lambda, rounds, max_depth, build_ms, optimize_ms)};
    const std::string csv = reports_to_csv(rows);
    if (out.empty()) {
      std::cout << csv;
    } else {
      io::write_file(out, csv);
    }
  }
};

struct SweepCommon {
  DataOptions data;
  StructureOptions st;
  TimingCli timing;
  std::string out;

  BenchReport run_one(const Experiment& ex, const StructureSpec& spec, const std::optional<ScalingConstants>& sc,
                      BuildOutcome* keep = nullptr) {
    BuildOutcome b = build_structure(ex, spec, sc);
    const Measurement m = measure(b.structure, ex.keys(), ex.split.test.nonkeys, timing.options());
    if (m.false_negatives > 0) throw FalseNegatives(to_string(spec.kind) + ": stored key answered NotFound");
    auto r = make_report(b.structure, m, spec.F, spec.kind == StructureKind::kClbf ? spec.lambda : 1.0,
                         ex.model->num_trees(), ex.train_params.max_depth, b.build_ms, b.optimize_ms);
    if (keep) *keep = std::move(b);
    return r;
  }

  static std::string label(const BenchReport& r) {
    if (r.structure == "plbf" || r.structure == "sandwiched") return r.structure + "-D" + std::to_string(r.depth);
    return r.structure;
  }
};

struct SweepFCmd : SweepCommon {
  std::string f_list = "0.1,0.05,0.02,0.01,0.005,0.002,0.001";
  std::string baselines = "classic,plbf";
  std::string plbf_depths = "1,10,100";

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("sweep-f", "Memory against false-positive rate for several structures");
    data.add(c);
    st.add(c, false, true);
    timing.add(c);
    c->add_option("--F-list", f_list, "Target rates")->capture_default_str();
    c->add_option("--baselines", baselines, "Any of classic,sandwiched,plbf")->capture_default_str();
    c->add_option("--plbf-depths", plbf_depths, "Model depths for plbf/sandwiched")->capture_default_str();
    c->add_option("--out", out, "Output prefix for .csv and .svg")->required();
    c->callback([this] { run(); });
  }

  void run() {
    const Experiment ex = data.prepare();
    const auto Fs = parse_list(f_list, "--F-list");
    std::vector<std::size_t> depths;
    for (double d : parse_list(plbf_depths, "--plbf-depths")) {
      require(d >= 1 && d <= static_cast<double>(ex.model->num_trees()), ErrorKind::kInvalidParameter,
              "baseline depth exceeds --rounds");
      depths.push_back(static_cast<std::size_t>(d));
    }
    std::vector<BenchReport> rows;
    const std::uint64_t seed = data.effective_seed();
    for (double F : Fs) {
      StructureOptions o = st;
      o.F = F;
      rows.push_back(run_one(ex, o.spec(StructureKind::kClbf, seed), std::nullopt));
      for (const auto& b : split_words(baselines)) {
        const auto kind = parse_structure_kind(b);
        if (kind == StructureKind::kClassic) {
          rows.push_back(run_one(ex, o.spec(kind, seed), std::nullopt));
          continue;
        }
        require(kind != StructureKind::kClbf, ErrorKind::kInvalidParameter, "clbf is always included");
        for (std::size_t d : depths) {
          o.depth = d;
          rows.push_back(run_one(ex, o.spec(kind, seed), std::nullopt));
        }
        o.depth = 0;
      }
    }
    io::write_file(out + ".csv", reports_to_csv(rows));
    std::vector<SvgSeries> series;
    for (const auto& r : rows) {
      const std::string name = label(r);
      auto it = std::find_if(series.begin(), series.end(), [&](const SvgSeries& s) { return s.name == name; });
      if (it == series.end()) {
        series.push_back({name, {}});
        it = series.end() - 1;
      }
      it->points.emplace_back(std::max(r.fpr, 1e-7), static_cast<double>(r.total_bytes));
    }
    io::write_file(out + ".svg", svg_chart("Memory vs false-positive rate", "empirical FPR", "total bytes", series, true, false));
    std::cout << reports_to_csv(rows);
  }
};

struct SweepLambdaCmd : SweepCommon {
  std::string lambda_list = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1";
  std::string baselines, plbf_depths = "1,10,100";

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("sweep-lambda", "Memory against reject time as lambda varies");
    data.add(c);
    st.add(c, true, false);
    timing.add(c);
    c->add_option("--lambda-list", lambda_list, "Lambda values")->capture_default_str();
    c->add_option("--baselines", baselines, "Optional reference structures, e.g. plbf");
    c->add_option("--plbf-depths", plbf_depths, "Model depths for plbf/sandwiched")->capture_default_str();
    c->add_option("--out", out, "Output prefix for .csv and .svg")->required();
    c->callback([this] { run(); });
  }

  void run() {
    const Experiment ex = data.prepare();
    const std::uint64_t seed = data.effective_seed();
    const auto sc = measure_scaling_constants(ex.keys().size(), st.F, ex.split.val.nonkeys, seed);
    std::vector<BenchReport> rows;
    std::vector<SvgSeries> series = {{"clbf", {}}};
    for (double lambda : parse_list(lambda_list, "--lambda-list")) {
      StructureOptions o = st;
      o.lambda = lambda;
      rows.push_back(run_one(ex, o.spec(StructureKind::kClbf, seed), sc));
      series[0].points.emplace_back(rows.back().reject_ns_e2e, static_cast<double>(rows.back().total_bytes));
    }
    for (const auto& b : split_words(baselines)) {
      const auto kind = parse_structure_kind(b);
      for (double d : parse_list(plbf_depths, "--plbf-depths")) {
        StructureOptions o = st;
        o.depth = kind == StructureKind::kClassic ? 0 : static_cast<std::size_t>(d);
        rows.push_back(run_one(ex, o.spec(kind, seed), sc));
        series.push_back({label(rows.back()), {{rows.back().reject_ns_e2e, static_cast<double>(rows.back().total_bytes)}}});
        if (kind == StructureKind::kClassic) break;
      }
    }
    io::write_file(out + ".csv", reports_to_csv(rows));
    io::write_file(out + ".svg",
               svg_chart("Memory vs reject time", "reject time per query (ns)", "total bytes", series, false, false));
    std::cout << reports_to_csv(rows);
  }
};

struct ExplainCmd {
  std::string filter;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("explain", "Describe a filter file and its optimizer trace");
    c->add_option("filter", filter, "Filter file written by build")->required();
    c->callback([this] { run(); });
  }

  static std::string list(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s%.6g", i ? ", " : "", v[i]);
      s += buf;
    }
    return s + "]";
  }

  void run() {
    const AnyStructure s = AnyStructure::deserialize(io::read_file(filter));
    const auto side = read_sidecar(filter + ".summary.json");
    std::printf("structure: %s\n", to_string(s.kind()).c_str());
    std::printf("memory: model %llu bytes, filters %llu bits\n", static_cast<unsigned long long>(s.model_bytes()),
                static_cast<unsigned long long>(s.filter_bits()));
    if (const auto* p = s.as_plbf()) {
      std::printf("depth: %zu\nboundaries: %s\nrates: %s\nanalytic FPR: %.6g (target %.6g)\n", p->depth(),
                  list(p->boundaries()).c_str(), list(p->fprs()).c_str(), p->analytic_fpr(), p->target_fpr());
      return;
    }
    if (const auto* w = s.as_sandwiched()) {
      std::printf("depth: %zu\npre-filter rate: %.6g\nthreshold: %.6g\nbackup rate: %.6g\nanalytic FPR: %.6g (target %.6g)\n",
                  w->depth(), w->params().pre_fpr, w->params().threshold, w->params().backup_fpr, w->analytic_fpr(),
                  w->target_fpr());
      return;
    }
    if (const auto* b = s.as_classic()) {
      std::printf("classical filter: %zu keys at rate %.6g\n", b->capacity(), b->target_fpr());
      return;
    }
    const Clbf& c = *s.as_clbf();
    const CascadeConfig& cfg = c.config();
    std::printf("keys: %zu\nF: %.6g\nlambda: %.6g\nD: %zu\n", c.key_count(), cfg.target_fpr, cfg.lambda, cfg.depth);
    if (cfg.depth == 0) {
      std::printf("classical fallback: one Bloom filter at rate %.6g\n", cfg.target_fpr);
      std::printf("analytic FPR: %.6g\n", cfg.target_fpr);
    } else {
      std::printf("branch thresholds (%zu): %s\n", cfg.branch_thresholds.size(), list(cfg.branch_thresholds).c_str());
      std::printf("trunk rates: %s\n", list(cfg.trunk_fprs).c_str());
      std::printf("branch rates: %s\n", list(cfg.branch_fprs).c_str());
      std::printf("final boundaries: %s\n", list(cfg.final_boundaries).c_str());
      std::printf("final rates: %s\n", list(cfg.final_fprs).c_str());
    }
    if (cfg.depth > 0 && c.profile()) {
      const DepthProfile& p = *c.profile();
      std::printf("%6s %10s %10s %10s %10s\n", "depth", "g_trunk", "h_trunk", "g_branch", "h_branch");
      for (std::size_t d = 0; d < cfg.depth; ++d) {
        std::printf("%6zu %10.5g %10.5g %10.5g %10.5g\n", d + 1, p.g_trunk[d], p.h_trunk[d], p.g_branch[d], p.h_branch[d]);
      }
      std::printf("final g: %s\nfinal h: %s\n", list(p.g_final[cfg.depth - 1]).c_str(),
                  list(p.h_final[cfg.depth - 1]).c_str());
      ModelCosts costs = ModelCosts::from(c.ensemble());
      if (side && side->contains("tree_time_ns")) {
        const auto t = (*side)["tree_time_ns"].get<std::vector<double>>();
        if (t.size() >= cfg.depth) costs.time_ns.assign(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(cfg.depth));
      }
      std::printf("analytic FPR: %.6g\n", analytic_fpr(cfg, p));
      std::printf("analytic memory: %.1f bits\n", analytic_memory_bits(cfg, costs, p, c.key_count()));
      std::printf("analytic reject time: %.3f ns (%.4f model evaluations per non-key)\n",
                  analytic_reject_time_ns(cfg, costs, p), expected_model_evaluations(cfg, p));
    }
    if (side) {
      if (side->contains("objective")) std::printf("objective: %.6g\n", (*side)["objective"].get<double>());
      if (side->contains("alpha")) std::printf("chosen alpha: %g\n", (*side)["alpha"].get<double>());
    }
    const std::string trace_path = filter + ".trace.jsonl";
    if (std::filesystem::exists(trace_path)) {
      const auto trace = trace_from_jsonl(io::read_file(trace_path));
      std::printf("trace: %zu records\n", trace.size());
      std::printf("%10s %12s %6s\n", "alpha", "dp(1,0)", "branch");
      for (const auto& t : trace) {
        if (t.depth != 1 || t.exponent != 0) continue;
        const double v = t.branch ? *t.check_value : t.hat_value;
        std::printf("%10g %12.6g %6s\n", t.alpha, v, t.branch ? "yes" : "no");
      }
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascaded learned Bloom filter toolkit"};
  app.require_subcommand(1);
  BuildCmd build;
  BenchCmd bench;
  SweepFCmd sweep_f;
  SweepLambdaCmd sweep_lambda;
  ExplainCmd explain;
  build.add(app);
  bench.add(app);
  sweep_f.add(app);
  sweep_lambda.add(app);
  explain.add(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  } catch (const FalseNegatives& e) {
    std::cerr << "error: false negative: " << e.what() << "\n";
    return kExitFalseNegative;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::kParse:
      case ErrorKind::kFormat: return kExitParse;
      case ErrorKind::kIo: return kExitIo;
      default: return kExitInvalid;
    }
  }
  return 0;
}
