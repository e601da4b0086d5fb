#include "clbf/cost_model.hpp"

#include <cmath>

#include "clbf/bloom_filter.hpp"
#include "clbf/error.hpp"

namespace clbf {

double f_tilde(double g, double h, double budget) {
  if (h <= 0.0) return 1.0;
  return std::min(budget * g / h, 1.0);
}

double s_tilde(double g, double eps, std::size_t n) {
  if (g <= 0.0 || eps >= 1.0) return 0.0;
  return kBloomSizeConstant * static_cast<double>(n) * g * std::log2(1.0 / std::max(eps, kMinFpr));
}

void DepthProfile::validate() const {
  const std::size_t D = g_trunk.size();
  auto same = [&](std::size_t s, const char* what) {
    require(s == D, ErrorKind::kDimensionMismatch, std::string("profile field has wrong length: ") + what);
  };
  require(D >= 1, ErrorKind::kInvalidParameter, "profile needs at least one depth");
  same(h_trunk.size(), "h_trunk");
  same(g_branch.size(), "g_branch");
  same(h_branch.size(), "h_branch");
  same(boundaries.size(), "boundaries");
  same(g_final.size(), "g_final");
  same(h_final.size(), "h_final");
  const std::size_t K = regions();
  require(K >= 1, ErrorKind::kInvalidParameter, "profile needs at least one final region");
  auto frac = [](double v) { return v >= 0.0 && v <= 1.0 + 1e-12; };
  for (std::size_t d = 0; d < D; ++d) {
    require(frac(g_trunk[d]) && frac(h_trunk[d]) && frac(g_branch[d]) && frac(h_branch[d]),
            ErrorKind::kInvalidParameter, "profile fractions must lie in [0,1]");
    require(g_final[d].size() == K && h_final[d].size() == K && boundaries[d].size() == K + 1,
            ErrorKind::kDimensionMismatch, "final-region tables must all have K entries");
    for (std::size_t k = 0; k < K; ++k) {
      require(frac(g_final[d][k]) && frac(h_final[d][k]), ErrorKind::kInvalidParameter,
              "profile fractions must lie in [0,1]");
    }
  }
}

void DepthProfile::serialize(io::Writer& w) const {
  w.put_vector(g_trunk);
  w.put_vector(h_trunk);
  w.put_vector(g_branch);
  w.put_vector(h_branch);
  w.put_vector(thresholds);
  w.put<std::uint64_t>(regions());
  for (std::size_t d = 0; d < max_depth(); ++d) {
    for (double v : boundaries[d]) w.put(v);
    for (double v : g_final[d]) w.put(v);
    for (double v : h_final[d]) w.put(v);
  }
  w.put<std::uint64_t>(key_total);
  w.put<std::uint64_t>(nonkey_total);
  w.put_vector<std::uint64_t>({key_trunk.begin(), key_trunk.end()});
  w.put_vector<std::uint64_t>({nonkey_trunk.begin(), nonkey_trunk.end()});
  w.put_vector<std::uint64_t>({key_branch.begin(), key_branch.end()});
  w.put_vector<std::uint64_t>({nonkey_branch.begin(), nonkey_branch.end()});
}

DepthProfile DepthProfile::deserialize(io::Reader& r) {
  DepthProfile p;
  p.g_trunk = r.get_vector<double>();
  p.h_trunk = r.get_vector<double>();
  p.g_branch = r.get_vector<double>();
  p.h_branch = r.get_vector<double>();
  p.thresholds = r.get_vector<double>();
  const auto K = r.get<std::uint64_t>();
  const std::size_t D = p.g_trunk.size();
  require(K <= r.remaining(), ErrorKind::kFormat, "truncated profile");
  p.boundaries.assign(D, std::vector<double>(K + 1));
  p.g_final.assign(D, std::vector<double>(K));
  p.h_final.assign(D, std::vector<double>(K));
  for (std::size_t d = 0; d < D; ++d) {
    for (auto& v : p.boundaries[d]) v = r.get<double>();
    for (auto& v : p.g_final[d]) v = r.get<double>();
    for (auto& v : p.h_final[d]) v = r.get<double>();
  }
  p.key_total = r.get<std::uint64_t>();
  p.nonkey_total = r.get<std::uint64_t>();
  auto counts = [&]() {
    const auto v = r.get_vector<std::uint64_t>();
    return std::vector<std::size_t>(v.begin(), v.end());
  };
  p.key_trunk = counts();
  p.nonkey_trunk = counts();
  p.key_branch = counts();
  p.nonkey_branch = counts();
  p.validate();
  return p;
}

ModelCosts ModelCosts::from(const BoostedEnsemble& e) {
  ModelCosts c;
  c.size_bits.resize(e.num_trees());
  for (std::size_t d = 1; d <= e.num_trees(); ++d) c.size_bits[d - 1] = 8.0 * static_cast<double>(e.tree_size_bytes(d));
  c.time_ns = e.calibrated() ? e.tree_time_ns() : std::vector<double>(e.num_trees(), 0.0);
  return c;
}

}  // namespace clbf
