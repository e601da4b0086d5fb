#include "clbf/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "clbf/error.hpp"
#include "clbf/timing.hpp"

namespace clbf {

std::string to_string(StructureKind k) {
  switch (k) {
    case StructureKind::kClassic: return "classic";
    case StructureKind::kSandwiched: return "sandwiched";
    case StructureKind::kPlbf: return "plbf";
    case StructureKind::kClbf: return "clbf";
  }
  return "?";
}

StructureKind parse_structure_kind(std::string_view s) {
  for (auto k : {StructureKind::kClassic, StructureKind::kSandwiched, StructureKind::kPlbf, StructureKind::kClbf}) {
    if (s == to_string(k)) return k;
  }
  fail(ErrorKind::kInvalidParameter, "unknown structure '" + std::string(s) + "'");
}

// ------------------------------------------------------------ structure

AnyStructure AnyStructure::deserialize(std::string_view bytes) {
  auto starts = [&](std::string_view m) { return bytes.substr(0, m.size()) == m; };
  if (starts("CLBF-V1")) return AnyStructure(Clbf::deserialize(bytes));
  if (starts("PLBF-V1")) return AnyStructure(Plbf::deserialize(bytes));
  if (starts("SLBF-V1")) return AnyStructure(Sandwiched::deserialize(bytes));
  if (starts("BLOOM-V1")) return AnyStructure(deserialize_classic(bytes));
  fail(ErrorKind::kFormat, "unrecognized filter container");
}

std::string AnyStructure::serialize() const {
  return std::visit(
      [](const auto& s) -> std::string {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, BloomFilter>) {
          return serialize_classic(s);
        } else {
          return s.serialize();
        }
      },
      v_);
}

bool AnyStructure::contains(std::span<const double> x, const KeyDigest& d, QueryStats* stats) const {
  return std::visit(
      [&](const auto& s) -> bool {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, BloomFilter>) {
          return s.contains(d);
        } else {
          return s.contains(x, d, stats);
        }
      },
      v_);
}

std::uint64_t AnyStructure::model_bytes() const {
  return std::visit(
      [](const auto& s) -> std::uint64_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, BloomFilter>) {
          return 0;
        } else {
          return s.model_bytes();
        }
      },
      v_);
}

std::uint64_t AnyStructure::filter_bits() const {
  return std::visit(
      [](const auto& s) -> std::uint64_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, BloomFilter>) {
          return s.size_bits();
        } else {
          return s.filter_bits();
        }
      },
      v_);
}

const BoostedEnsemble* AnyStructure::ensemble() const {
  return std::visit(
      [](const auto& s) -> const BoostedEnsemble* {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, BloomFilter>) {
          return nullptr;
        } else {
          return &s.ensemble();
        }
      },
      v_);
}

std::size_t AnyStructure::depth() const {
  if (const auto* c = as_clbf()) return c->config().depth;
  if (const auto* p = as_plbf()) return p->depth();
  if (const auto* s = as_sandwiched()) return s->depth();
  return 0;
}

std::size_t AnyStructure::regions() const {
  if (const auto* c = as_clbf()) return c->config().depth == 0 ? 1 : c->config().regions();
  if (const auto* p = as_plbf()) return p->regions();
  return 1;
}

// ----------------------------------------------------------------- csv

namespace {

constexpr const char* kColumns[] = {"structure",   "F",           "lambda",          "rounds",        "depth",
                                    "K",           "max_depth",   "model_bytes",     "filter_bytes",  "total_bytes",
                                    "fpr",         "fpr_stderr",  "reject_ns_model", "reject_ns_e2e", "accept_ns",
                                    "build_ms",    "optimize_ms"};

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(std::string_view s, std::size_t row, const char* column) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    fail(ErrorKind::kParse, "report row " + std::to_string(row) + ", column " + column + ": bad number");
  }
  return v;
}

}  // namespace

std::string report_csv_header() {
  std::string h;
  for (const char* c : kColumns) {
    if (!h.empty()) h += ',';
    h += c;
  }
  return h;
}

std::string reports_to_csv(std::span<const BenchReport> rows) {
  std::string out = report_csv_header() + "\n";
  for (const auto& r : rows) {
    out += r.structure + ',' + num(r.F) + ',' + num(r.lambda) + ',' + std::to_string(r.rounds) + ',' +
           std::to_string(r.depth) + ',' + std::to_string(r.K) + ',' + std::to_string(r.max_depth) + ',' +
           std::to_string(r.model_bytes) + ',' + std::to_string(r.filter_bytes) + ',' + std::to_string(r.total_bytes) +
           ',' + num(r.fpr) + ',' + num(r.fpr_stderr) + ',' + num(r.reject_ns_model) + ',' + num(r.reject_ns_e2e) +
           ',' + num(r.accept_ns) + ',' + num(r.build_ms) + ',' + num(r.optimize_ms) + '\n';
  }
  return out;
}

std::vector<BenchReport> parse_reports_csv(std::string_view text) {
  std::vector<BenchReport> rows;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (line_no == 1) {
      require(line == report_csv_header(), ErrorKind::kParse, "unexpected report header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::size_t s = 0;
    for (;;) {
      const std::size_t c = line.find(',', s);
      f.push_back(line.substr(s, c == std::string_view::npos ? std::string_view::npos : c - s));
      if (c == std::string_view::npos) break;
      s = c + 1;
    }
    require(f.size() == std::size(kColumns), ErrorKind::kParse,
            "report row " + std::to_string(line_no) + ": expected " + std::to_string(std::size(kColumns)) + " fields");
    BenchReport r;
    std::size_t i = 0;
    auto d = [&]() { const auto k = i++; return parse_number<double>(f[k], line_no, kColumns[k]); };
    auto u = [&]() { const auto k = i++; return parse_number<std::uint64_t>(f[k], line_no, kColumns[k]); };
    r.structure = std::string(f[i++]);
    r.F = d();
    r.lambda = d();
    r.rounds = u();
    r.depth = u();
    r.K = u();
    r.max_depth = static_cast<int>(u());
    r.model_bytes = u();
    r.filter_bytes = u();
    r.total_bytes = u();
    r.fpr = d();
    r.fpr_stderr = d();
    r.reject_ns_model = d();
    r.reject_ns_e2e = d();
    r.accept_ns = d();
    r.build_ms = d();
    r.optimize_ms = d();
    rows.push_back(std::move(r));
  }
  require(line_no >= 1, ErrorKind::kParse, "empty report");
  return rows;
}

// ------------------------------------------------------------- measure

namespace {

template <class Body>
double time_per_query(std::size_t count, const TimingOptions& t, Body body) {
  std::size_t sink = 0;
  for (std::size_t i = 0; i < t.warmup; ++i) sink += body(i % count);
  std::vector<double> means;
  std::size_t next = 0;
  for (std::size_t b = 0; b < t.batches; ++b) {
    const auto t0 = now_ns();
    for (std::size_t i = 0; i < t.queries_per_batch; ++i) {
      sink += body(next);
      if (++next == count) next = 0;
    }
    means.push_back(static_cast<double>(now_ns() - t0) / static_cast<double>(t.queries_per_batch));
  }
  do_not_optimize(sink);
  return median(means);
}

}  // namespace

Measurement measure(const AnyStructure& s, const SampleSet& keys, const SampleSet& nonkeys,
                    const std::optional<TimingOptions>& timing) {
  Measurement m;
  m.keys = keys.size();
  m.nonkeys = nonkeys.size();
  for (std::size_t i = 0; i < keys.size(); ++i) m.false_negatives += !s.contains(keys.row(i), keys.id(i));

  std::vector<std::size_t> rejected;
  std::vector<std::uint32_t> evals;
  std::size_t total_evals = 0;
  for (std::size_t i = 0; i < nonkeys.size(); ++i) {
    QueryStats st;
    if (s.contains(nonkeys.row(i), nonkeys.id(i), &st)) {
      ++m.false_positives;
    } else {
      rejected.push_back(i);
      evals.push_back(static_cast<std::uint32_t>(st.model_evaluations));
    }
    total_evals += st.model_evaluations;
  }
  if (!nonkeys.empty()) m.mean_model_evaluations = static_cast<double>(total_evals) / static_cast<double>(nonkeys.size());
  if (!timing) return m;

  if (!rejected.empty()) {
    m.reject_ns_e2e = time_per_query(rejected.size(), *timing, [&](std::size_t j) {
      const std::size_t i = rejected[j];
      return static_cast<std::size_t>(s.contains(nonkeys.row(i), nonkeys.id(i)));
    });
    if (const BoostedEnsemble* e = s.ensemble()) {
      m.reject_ns_model = time_per_query(rejected.size(), *timing, [&](std::size_t j) {
        const auto x = nonkeys.row(rejected[j]);
        double margin = e->base_margin();
        for (std::uint32_t t = 0; t < evals[j]; ++t) margin += e->tree_output(t, x);
        return static_cast<std::size_t>(sigmoid(margin) >= 0.5);
      });
    }
  }
  if (!keys.empty()) {
    m.accept_ns = time_per_query(keys.size(), *timing, [&](std::size_t i) {
      return static_cast<std::size_t>(s.contains(keys.row(i), keys.id(i)));
    });
  }
  return m;
}

// ---------------------------------------------------------- experiment

Experiment prepare_experiment(const LabeledDataset& ds, const ExperimentOptions& opts) {
  Experiment ex;
  ex.split = split(ds, opts.train_frac, opts.val_frac, opts.test_frac, opts.seed, KeySplitPolicy::kAllKeysTrainAndVal);
  ex.train_params = opts.train;
  const auto t0 = now_ns();
  ex.model = std::make_shared<BoostedEnsemble>(train(ex.split.train.keys, ex.split.train.nonkeys, opts.train));
  ex.train_ms = static_cast<double>(now_ns() - t0) / 1e6;
  if (opts.calibrate && ex.model->num_trees() > 0) {
    const SampleSet& probe = ex.split.val.nonkeys.empty() ? ex.split.val.keys : ex.split.val.nonkeys;
    calibrate_time(*ex.model, probe);
  }
  return ex;
}

BuildOutcome build_structure(const Experiment& ex, const StructureSpec& spec,
                             const std::optional<ScalingConstants>& scaling, bool keep_trace) {
  const auto& keys = ex.keys();
  const auto& vk = ex.split.val.keys;
  const auto& vn = ex.split.val.nonkeys;
  std::shared_ptr<const BoostedEnsemble> model = ex.model;
  const std::size_t depth = spec.depth == 0 ? model->num_trees() : spec.depth;
  const auto t0 = now_ns();
  auto elapsed_ms = [](std::int64_t from) { return static_cast<double>(now_ns() - from) / 1e6; };
  switch (spec.kind) {
    case StructureKind::kClassic: {
      BuildOutcome out{AnyStructure(build_classic(keys, spec.F, spec.seed))};
      out.build_ms = elapsed_ms(t0);
      return out;
    }
    case StructureKind::kPlbf: {
      BuildOutcome out{AnyStructure(Plbf::build(model, depth, keys, vk, vn, spec.F, spec.K, spec.segments, spec.seed))};
      out.build_ms = elapsed_ms(t0);
      return out;
    }
    case StructureKind::kSandwiched: {
      BuildOutcome out{AnyStructure(
          Sandwiched::build(model, depth, keys, vk, vn, spec.F, spec.p, spec.P, spec.alpha_grid, spec.seed))};
      out.build_ms = elapsed_ms(t0);
      return out;
    }
    case StructureKind::kClbf: break;
  }

  OptimizerParams params;
  params.target_fpr = spec.F;
  params.lambda = spec.lambda;
  params.p = spec.p;
  params.grid_size = spec.P;
  params.regions = spec.K;
  params.segments = spec.segments;
  params.alpha_grid = spec.alpha_grid;
  params.num_keys = std::max<std::size_t>(keys.size(), 1);
  const ScalingConstants sc = scaling ? *scaling : measure_scaling_constants(params.num_keys, spec.F, vn, spec.seed);
  params.memory_scale_bits = sc.memory_bits;
  params.reject_scale_ns = sc.reject_ns;

  const auto t1 = now_ns();
  auto opt = optimize(*model, vk, vn, params, keep_trace);
  const double optimize_ms = elapsed_ms(t1);
  const auto t2 = now_ns();
  Clbf c = Clbf::build(opt.config, model, keys, spec.seed);
  if (opt.profile) c.set_profile(*opt.profile);
  BuildOutcome out{AnyStructure(std::move(c))};
  out.build_ms = elapsed_ms(t2);
  out.optimize_ms = optimize_ms;
  out.optimized = std::move(opt);
  out.params = params;
  out.scaling = sc;
  return out;
}

BenchReport make_report(const AnyStructure& s, const Measurement& m, double F, double lambda, std::size_t rounds,
                        int max_depth, double build_ms, double optimize_ms) {
  BenchReport r;
  r.structure = to_string(s.kind());
  r.F = F;
  r.lambda = lambda;
  r.rounds = rounds;
  r.depth = s.depth();
  r.K = s.regions();
  r.max_depth = max_depth;
  r.model_bytes = s.model_bytes();
  r.filter_bytes = (s.filter_bits() + 7) / 8;
  r.total_bytes = r.model_bytes + r.filter_bytes;
  if (m.nonkeys > 0) {
    r.fpr = static_cast<double>(m.false_positives) / static_cast<double>(m.nonkeys);
    r.fpr_stderr = std::sqrt(r.fpr * (1.0 - r.fpr) / static_cast<double>(m.nonkeys));
  }
  r.reject_ns_model = m.reject_ns_model;
  r.reject_ns_e2e = m.reject_ns_e2e;
  r.accept_ns = m.accept_ns;
  r.build_ms = build_ms;
  r.optimize_ms = optimize_ms;
  return r;
}

// ----------------------------------------------------------- generator

GeneratorSpec parse_generator_spec(std::string_view text) {
  GeneratorSpec g;
  const auto colon = text.find(':');
  g.kind = std::string(text.substr(0, colon));
  require(g.kind == "random" || g.kind == "separation" || g.kind == "clusters", ErrorKind::kParse,
          "unknown generator '" + g.kind + "'");
  if (colon == std::string_view::npos) return g;
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    const auto eq = item.find('=');
    require(eq != std::string_view::npos, ErrorKind::kParse, "generator option needs key=value: " + std::string(item));
    const std::string key(item.substr(0, eq));
    const std::string_view val = item.substr(eq + 1);
    auto uint = [&]() { return parse_number<std::uint64_t>(val, 0, key.c_str()); };
    if (key == "delta") {
      g.delta = parse_number<double>(val, 0, "delta");
    } else if (key == "c" || key == "clusters") {
      g.clusters = uint();
    } else if (key == "keys") {
      g.keys = uint();
    } else if (key == "nonkeys") {
      g.nonkeys = uint();
    } else if (key == "dim") {
      g.dim = uint();
    } else if (key == "seed") {
      g.seed = uint();
    } else {
      fail(ErrorKind::kParse, "unknown generator option '" + key + "'");
    }
  }
  return g;
}

LabeledDataset generate(const GeneratorSpec& g) {
  if (g.kind == "random") return gen_random(g.keys, g.nonkeys, g.dim, g.seed);
  if (g.kind == "separation") return gen_separation(g.delta, g.keys, g.nonkeys, g.dim, g.seed);
  if (g.kind == "clusters") return gen_clusters(g.clusters, g.keys, g.nonkeys, g.dim, g.seed);
  fail(ErrorKind::kParse, "unknown generator '" + g.kind + "'");
}

// ----------------------------------------------------------------- svg

namespace {

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

std::string svg_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                      std::span<const SvgSeries> series, bool log_x, bool log_y) {
  constexpr double W = 720, H = 460, L = 80, R = 170, T = 40, B = 60;
  auto tx = [&](double v) { return log_x ? std::log10(std::max(v, 1e-300)) : v; };
  auto ty = [&](double v) { return log_y ? std::log10(std::max(v, 1e-300)) : v; };
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    for (auto [x, y] : s.points) {
      if ((log_x && x <= 0) || (log_y && y <= 0)) continue;
      x0 = std::min(x0, tx(x));
      x1 = std::max(x1, tx(x));
      y0 = std::min(y0, ty(y));
      y1 = std::max(y1, ty(y));
    }
  }
  if (x0 > x1) x0 = 0, x1 = 1;
  if (y0 > y1) y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double px = (x1 - x0) * 0.05, py = (y1 - y0) * 0.05;
  x0 -= px, x1 += px, y0 -= py, y1 += py;
  auto sx = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << (W - R + L) / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    const double vx = log_x ? std::pow(10.0, fx) : fx, vy = log_y ? std::pow(10.0, fy) : fy;
    const double gx = L + (W - L - R) * i / 4.0, gy = H - B - (H - T - B) * i / 4.0;
    o << "<line x1=\"" << gx << "\" y1=\"" << H - B << "\" x2=\"" << gx << "\" y2=\"" << H - B + 5 << "\" stroke=\"black\"/>";
    o << "<text x=\"" << gx << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << fmt("%.3g", vx) << "</text>\n";
    o << "<line x1=\"" << L - 5 << "\" y1=\"" << gy << "\" x2=\"" << L << "\" y2=\"" << gy << "\" stroke=\"black\"/>";
    o << "<text x=\"" << L - 8 << "\" y=\"" << gy + 4 << "\" text-anchor=\"end\">" << fmt("%.3g", vy) << "</text>\n";
  }
  o << "<text x=\"" << (W - R + L) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << escape(x_label)
    << (log_x ? " (log)" : "") << "</text>\n";
  o << "<text transform=\"translate(18," << (H - B + T) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(y_label) << (log_y ? " (log)" : "") << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = colors[i % std::size(colors)];
    std::string pts;
    for (auto [x, y] : series[i].points) {
      if ((log_x && x <= 0) || (log_y && y <= 0)) continue;
      pts += fmt("%.2f", sx(x)) + "," + fmt("%.2f", sy(y)) + " ";
    }
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts << "\"/>\n";
    for (auto [x, y] : series[i].points) {
      if ((log_x && x <= 0) || (log_y && y <= 0)) continue;
      o << "<circle cx=\"" << fmt("%.2f", sx(x)) << "\" cy=\"" << fmt("%.2f", sy(y)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = T + 10 + 18.0 * static_cast<double>(i);
    o << "<rect x=\"" << W - R + 15 << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>";
    o << "<text x=\"" << W - R + 30 << "\" y=\"" << ly + 1 << "\">" << escape(series[i].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace clbf
