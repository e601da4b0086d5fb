#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clbf {

/// Row-major feature matrix plus one identity byte-string per row. The
/// identity is what Bloom filters hash; the features are what models see.
class SampleSet {
 public:
  SampleSet() = default;
  explicit SampleSet(std::size_t dim) : dim_(dim) {}

  void add(std::span<const double> features, std::string identity);
  void reserve(std::size_t rows) {
    values_.reserve(rows * dim_);
    ids_.reserve(rows);
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  std::span<const double> row(std::size_t i) const noexcept { return {values_.data() + i * dim_, dim_}; }
  const std::string& id(std::size_t i) const noexcept { return ids_[i]; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Rows at the given indices, in order.
  SampleSet subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const SampleSet&, const SampleSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
  std::vector<std::string> ids_;
};

/// Canonical identity text of a feature vector: 9 significant digits,
/// comma separated.
std::string canonical_identity(std::span<const double> features);

}  // namespace clbf
