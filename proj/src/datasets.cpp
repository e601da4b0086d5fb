#include "clbf/datasets.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "clbf/binary_io.hpp"
#include "clbf/error.hpp"

namespace clbf {

double CounterRng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1p-53;  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::uint64_t CounterRng::below(std::uint64_t bound) noexcept {
  // Lemire's multiply-shift with rejection.
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

void check_disjoint(const LabeledDataset& ds) {
  std::unordered_set<std::string_view> key_ids(ds.keys.ids().begin(), ds.keys.ids().end());
  for (std::size_t i = 0; i < ds.nonkeys.size(); ++i) {
    if (key_ids.contains(ds.nonkeys.id(i))) {
      fail(ErrorKind::kInvalidParameter, "identity labelled both key and non-key: " + ds.nonkeys.id(i));
    }
  }
}

namespace {

void check_counts(std::size_t n_keys, std::size_t n_nonkeys, std::size_t dim) {
  require(n_keys >= 1 && n_nonkeys >= 1, ErrorKind::kInvalidParameter, "need at least one key and one non-key");
  require(dim >= 1, ErrorKind::kInvalidParameter, "dimension must be >= 1");
}

template <typename Fill>
void draw_rows(SampleSet& out, std::size_t rows, Fill&& fill) {
  std::vector<double> x(out.dim());
  out.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t f = 0; f < x.size(); ++f) x[f] = fill(f);
    out.add(x, canonical_identity(x));
  }
}

}  // namespace

LabeledDataset gen_random(std::size_t n_keys, std::size_t n_nonkeys, std::size_t dim, std::uint64_t seed) {
  check_counts(n_keys, n_nonkeys, dim);
  CounterRng rng(seed);
  LabeledDataset ds{SampleSet(dim), SampleSet(dim), seed};
  draw_rows(ds.keys, n_keys, [&](std::size_t) { return rng.uniform(); });
  draw_rows(ds.nonkeys, n_nonkeys, [&](std::size_t) { return rng.uniform(); });
  check_disjoint(ds);
  return ds;
}

LabeledDataset gen_separation(double delta, std::size_t n_keys, std::size_t n_nonkeys, std::size_t dim,
                              std::uint64_t seed) {
  check_counts(n_keys, n_nonkeys, dim);
  require(delta >= 0.0, ErrorKind::kInvalidParameter, "delta must be >= 0");
  CounterRng rng(seed);
  LabeledDataset ds{SampleSet(dim), SampleSet(dim), seed};
  draw_rows(ds.keys, n_keys, [&](std::size_t) { return rng.normal(); });
  draw_rows(ds.nonkeys, n_nonkeys, [&](std::size_t) { return delta + rng.normal(); });
  check_disjoint(ds);
  return ds;
}

std::vector<std::size_t> equal_split_counts(std::size_t total, std::size_t parts) {
  require(parts >= 1, ErrorKind::kInvalidParameter, "need at least one part");
  std::vector<std::size_t> out(parts, total / parts);
  for (std::size_t i = 0; i < total % parts; ++i) ++out[i];
  return out;
}

LabeledDataset gen_clusters(std::size_t clusters, std::size_t n_keys, std::size_t n_nonkeys, std::size_t dim,
                            std::uint64_t seed) {
  check_counts(n_keys, n_nonkeys, dim);
  require(clusters >= 1, ErrorKind::kInvalidParameter, "cluster count must be >= 1");
  CounterRng rng(seed);
  auto centers = [&]() {
    std::vector<double> c(clusters * dim);
    for (auto& v : c) v = -10.0 + 20.0 * rng.uniform();
    return c;
  };
  const auto key_centers = centers();
  const auto nonkey_centers = centers();
  LabeledDataset ds{SampleSet(dim), SampleSet(dim), seed};
  auto fill = [&](SampleSet& out, std::size_t total, const std::vector<double>& ctr) {
    out.reserve(total);
    std::vector<double> x(dim);
    const auto counts = equal_split_counts(total, clusters);
    for (std::size_t c = 0; c < clusters; ++c) {
      for (std::size_t i = 0; i < counts[c]; ++i) {
        for (std::size_t f = 0; f < dim; ++f) x[f] = ctr[c * dim + f] + rng.normal();
        out.add(x, canonical_identity(x));
      }
    }
  };
  fill(ds.keys, n_keys, key_centers);
  fill(ds.nonkeys, n_nonkeys, nonkey_centers);
  check_disjoint(ds);
  return ds;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

LabeledDataset parse_csv(std::string_view text, const std::string& label_column, const std::string& key_label) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    while (pos < text.size()) {
      const auto end = text.find('\n', pos);
      line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
      pos = end == std::string_view::npos ? text.size() : end + 1;
      ++line_no;
      if (!trim(line).empty()) return true;
    }
    return false;
  };

  std::string_view header;
  if (!next_line(header)) fail(ErrorKind::kParse, "empty CSV input");
  const auto names = split_fields(header);
  std::size_t label_idx = names.size();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (trim(names[i]) == label_column) label_idx = i;
  }
  if (label_idx == names.size()) fail(ErrorKind::kParse, "missing label column '" + label_column + "'");
  const std::size_t dim = names.size() - 1;
  require(dim >= 1, ErrorKind::kParse, "CSV has no feature columns");

  LabeledDataset ds{SampleSet(dim), SampleSet(dim), 0};
  std::unordered_map<std::string, bool> seen;  // identity -> is_key
  std::vector<double> x(dim);
  std::string_view line;
  while (next_line(line)) {
    const auto fields = split_fields(line);
    if (fields.size() != names.size()) {
      fail(ErrorKind::kParse, "row " + std::to_string(line_no) + ": expected " + std::to_string(names.size()) +
                                  " fields, got " + std::to_string(fields.size()));
    }
    std::size_t f = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (c == label_idx) continue;
      const auto field = trim(fields[c]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        fail(ErrorKind::kParse, "row " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                                    ": non-numeric feature '" + std::string(field) + "'");
      }
      x[f++] = v;
    }
    const bool is_key = trim(fields[label_idx]) == key_label;
    auto id = canonical_identity(x);
    const auto [it, inserted] = seen.emplace(id, is_key);
    if (!inserted && it->second != is_key) {
      fail(ErrorKind::kParse, "row " + std::to_string(line_no) + ": identical features labelled both key and non-key");
    }
    (is_key ? ds.keys : ds.nonkeys).add(x, std::move(id));
  }
  return ds;
}

LabeledDataset load_csv(const std::string& path, const std::string& label_column, const std::string& key_label) {
  return parse_csv(io::read_file(path), label_column, key_label);
}

std::string to_csv(const LabeledDataset& ds) {
  std::ostringstream out;
  for (std::size_t f = 0; f < ds.dim(); ++f) out << 'f' << f << ',';
  out << "label\n";
  char buf[40];
  auto rows = [&](const SampleSet& s, char label) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (double v : s.row(i)) {
        const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
        out.write(buf, end - buf);
        out << ',';
      }
      out << label << '\n';
    }
  };
  rows(ds.keys, '1');
  rows(ds.nonkeys, '0');
  return std::move(out).str();
}

void write_csv(const LabeledDataset& ds, const std::string& path) { io::write_file(path, to_csv(ds)); }

DatasetSplit split(const LabeledDataset& ds, double train_frac, double val_frac, double test_frac,
                   std::uint64_t seed, KeySplitPolicy policy) {
  require(train_frac >= 0 && val_frac >= 0 && test_frac >= 0, ErrorKind::kInvalidParameter,
          "split fractions must be non-negative");
  require(std::abs(train_frac + val_frac + test_frac - 1.0) < 1e-9, ErrorKind::kInvalidParameter,
          "split fractions must sum to 1");
  CounterRng rng(seed);
  auto shuffled = [&](std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
  };
  auto cut = [&](const SampleSet& s, SampleSet& a, SampleSet& b, SampleSet& c) {
    const auto idx = shuffled(s.size());
    const auto n = static_cast<double>(s.size());
    const auto n_train = std::min<std::size_t>(s.size(), static_cast<std::size_t>(std::llround(n * train_frac)));
    const auto n_val =
        std::min<std::size_t>(s.size() - n_train, static_cast<std::size_t>(std::llround(n * val_frac)));
    std::span<const std::size_t> all(idx);
    a = s.subset(all.subspan(0, n_train));
    b = s.subset(all.subspan(n_train, n_val));
    c = s.subset(all.subspan(n_train + n_val));
  };

  DatasetSplit out;
  out.train.seed = out.val.seed = out.test.seed = ds.seed;
  cut(ds.nonkeys, out.train.nonkeys, out.val.nonkeys, out.test.nonkeys);
  if (policy == KeySplitPolicy::kAllKeysTrainAndVal) {
    out.train.keys = ds.keys;
    out.val.keys = ds.keys;
    out.test.keys = SampleSet(ds.dim());
  } else {
    cut(ds.keys, out.train.keys, out.val.keys, out.test.keys);
  }
  return out;
}

}  // namespace clbf
