#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "clbf/baselines.hpp"
#include "clbf/cascade.hpp"
#include "clbf/datasets.hpp"
#include "clbf/gbdt.hpp"
#include "clbf/optimizer.hpp"

namespace clbf {

enum class StructureKind { kClassic, kSandwiched, kPlbf, kClbf };
std::string to_string(StructureKind k);
StructureKind parse_structure_kind(std::string_view s);

/// Any of the four structures behind one query interface.
class AnyStructure {
 public:
  explicit AnyStructure(BloomFilter f) : v_(std::move(f)) {}
  explicit AnyStructure(Sandwiched s) : v_(std::move(s)) {}
  explicit AnyStructure(Plbf p) : v_(std::move(p)) {}
  explicit AnyStructure(Clbf c) : v_(std::move(c)) {}

  /// Dispatches on the container magic.
  static AnyStructure deserialize(std::string_view bytes);
  std::string serialize() const;

  StructureKind kind() const noexcept { return static_cast<StructureKind>(v_.index()); }
  bool contains(std::span<const double> x, const KeyDigest& d, QueryStats* stats = nullptr) const;
  bool contains(std::span<const double> x, std::string_view id, QueryStats* stats = nullptr) const {
    return contains(x, digest(id), stats);
  }
  std::uint64_t model_bytes() const;
  std::uint64_t filter_bits() const;
  /// Trees evaluated by queries, in order; null for the classical filter.
  const BoostedEnsemble* ensemble() const;
  /// Model depth used (D for the cascade, 0 for the classical filter).
  std::size_t depth() const;
  /// Final-region count, 1 for classical and sandwiched structures.
  std::size_t regions() const;

  const Clbf* as_clbf() const { return std::get_if<Clbf>(&v_); }
  const Plbf* as_plbf() const { return std::get_if<Plbf>(&v_); }
  const Sandwiched* as_sandwiched() const { return std::get_if<Sandwiched>(&v_); }
  const BloomFilter* as_classic() const { return std::get_if<BloomFilter>(&v_); }

 private:
  std::variant<BloomFilter, Sandwiched, Plbf, Clbf> v_;
};

/// One row of benchmark output. Memory in bytes, times in nanoseconds
/// (per query) or milliseconds (construction).
struct BenchReport {
  std::string structure;
  double F = 0.0;
  double lambda = 0.0;
  std::size_t rounds = 0;  // trees trained
  std::size_t depth = 0;   // trees used
  std::size_t K = 0;
  int max_depth = 0;
  std::uint64_t model_bytes = 0, filter_bytes = 0, total_bytes = 0;
  double fpr = 0.0, fpr_stderr = 0.0;
  double reject_ns_model = 0.0, reject_ns_e2e = 0.0, accept_ns = 0.0;
  double build_ms = 0.0, optimize_ms = 0.0;

  friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

std::string report_csv_header();
std::string reports_to_csv(std::span<const BenchReport> rows);
std::vector<BenchReport> parse_reports_csv(std::string_view text);

struct TimingOptions {
  std::size_t batches = 5;
  std::size_t queries_per_batch = 100'000;
  std::size_t warmup = 10'000;
};

/// Query counts plus timings of one structure against keys and non-keys.
struct Measurement {
  std::size_t keys = 0, false_negatives = 0;
  std::size_t nonkeys = 0, false_positives = 0;
  double mean_model_evaluations = 0.0;  // over all non-key queries
  double reject_ns_model = 0.0, reject_ns_e2e = 0.0, accept_ns = 0.0;
};

/// Answers every key and non-key once; when `timing` is set, also times
/// rejections (end-to-end, and the model evaluations alone replayed in
/// isolation) and acceptances. Each timing is the median over batches of
/// the mean per-query time, after a discarded warm-up.
Measurement measure(const AnyStructure& s, const SampleSet& keys, const SampleSet& nonkeys,
                    const std::optional<TimingOptions>& timing);

/// Trained model and data shared by every structure of one experiment.
struct Experiment {
  DatasetSplit split;
  std::shared_ptr<BoostedEnsemble> model;
  TrainParams train_params;
  double train_ms = 0.0;
  /// Stored keys: the validation keys (every key under the default policy).
  const SampleSet& keys() const { return split.val.keys; }
};

struct ExperimentOptions {
  TrainParams train;
  double train_frac = 0.8, val_frac = 0.1, test_frac = 0.1;
  std::uint64_t seed = 0;
  bool calibrate = true;
};
Experiment prepare_experiment(const LabeledDataset& ds, const ExperimentOptions& opts);

struct StructureSpec {
  StructureKind kind = StructureKind::kClbf;
  double F = 0.01;
  double lambda = 1.0;
  std::size_t K = 5;
  std::size_t segments = 100;
  double p = 0.5;
  std::size_t P = 20;
  std::vector<double> alpha_grid = default_alpha_grid();
  std::size_t depth = 0;  // baseline model depth; 0 = every tree
  std::uint64_t seed = 0;
};

struct BuildOutcome {
  explicit BuildOutcome(AnyStructure s) : structure(std::move(s)) {}

  AnyStructure structure;
  double build_ms = 0.0, optimize_ms = 0.0;
  std::optional<OptimizeResult> optimized;  // cascade only
  OptimizerParams params;                   // cascade only
  ScalingConstants scaling;                 // cascade only
};

/// Builds one structure from the experiment. Scaling constants are measured
/// when `scaling` is empty.
BuildOutcome build_structure(const Experiment& ex, const StructureSpec& spec,
                             const std::optional<ScalingConstants>& scaling = std::nullopt, bool keep_trace = false);

/// Report row from a measurement.
BenchReport make_report(const AnyStructure& s, const Measurement& m, double F, double lambda,
                        std::size_t rounds, int max_depth, double build_ms, double optimize_ms);

/// Generator description such as "separation:delta=1,keys=20000".
struct GeneratorSpec {
  std::string kind;  // random | separation | clusters
  double delta = 1.0;
  std::size_t clusters = 64;
  std::size_t keys = 20'000, nonkeys = 50'000, dim = 20;
  std::uint64_t seed = 0;
};
GeneratorSpec parse_generator_spec(std::string_view text);
LabeledDataset generate(const GeneratorSpec& g);

/// Minimal SVG line chart.
struct SvgSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};
std::string svg_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                      std::span<const SvgSeries> series, bool log_x, bool log_y);

}  // namespace clbf
