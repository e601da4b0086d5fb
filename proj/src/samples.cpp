#include "clbf/samples.hpp"

#include <cstdio>

#include "clbf/error.hpp"

namespace clbf {

void SampleSet::add(std::span<const double> features, std::string identity) {
  require(features.size() == dim_, ErrorKind::kDimensionMismatch, "feature vector has wrong dimension");
  values_.insert(values_.end(), features.begin(), features.end());
  ids_.push_back(std::move(identity));
}

SampleSet SampleSet::subset(std::span<const std::size_t> rows) const {
  SampleSet out(dim_);
  out.reserve(rows.size());
  for (auto i : rows) out.add(row(i), ids_[i]);
  return out;
}

std::string canonical_identity(std::span<const double> features) {
  std::string out;
  out.reserve(features.size() * 16);
  char buf[32];
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (i) out.push_back(',');
    const int n = std::snprintf(buf, sizeof buf, "%.9g", features[i]);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

}  // namespace clbf
