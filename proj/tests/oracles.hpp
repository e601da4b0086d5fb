#pragma once

// Reference implementations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "clbf/datasets.hpp"
#include "clbf/optimizer.hpp"

namespace clbf::oracle {

// Independent scalar formulas for the oracle.
inline double rate_oracle(double g, double h, double budget) { return h <= 0.0 ? 1.0 : std::min(1.0, budget * g / h); }
inline double bits_oracle(double g, double eps, double n) {
  if (g <= 0.0 || eps >= 1.0) return 0.0;
  return n * g * std::log(1.0 / eps) / (std::log(2.0) * std::log(2.0));
}

// Splits `total` into `parts` random non-negative pieces that sum to it.
inline std::vector<double> random_parts(CounterRng& rng, double total, std::size_t parts, bool allow_zero) {
  std::vector<double> w(parts);
  for (auto& v : w) v = (allow_zero && rng.uniform() < 0.25) ? 0.0 : rng.uniform() + 0.05;
  double s = std::accumulate(w.begin(), w.end(), 0.0);
  if (s == 0.0) {
    w[0] = 1.0;
    s = 1.0;
  }
  for (auto& v : w) v = total * v / s;
  return w;
}

inline DepthProfile random_profile(CounterRng& rng, std::size_t D, std::size_t K) {
  DepthProfile p;
  double gt = 1.0, ht = 1.0;
  for (std::size_t d = 0; d < D; ++d) {
    p.g_trunk.push_back(gt);
    p.h_trunk.push_back(ht);
    const double gb = d + 1 < D ? gt * rng.uniform() * 0.6 : 0.0;
    const double hb = d + 1 < D ? (rng.uniform() < 0.2 ? 0.0 : ht * rng.uniform() * 0.3) : 0.0;
    p.g_branch.push_back(gb);
    p.h_branch.push_back(hb);
    p.g_final.push_back(random_parts(rng, gt, K, false));
    p.h_final.push_back(random_parts(rng, ht, K, true));
    std::vector<double> b{0.0};
    for (std::size_t k = 1; k < K; ++k) b.push_back(static_cast<double>(k) / static_cast<double>(K));
    b.push_back(1.0);
    p.boundaries.push_back(b);
    gt -= gb;
    ht -= hb;
  }
  return p;
}

inline ModelCosts random_costs(CounterRng& rng, std::size_t D) {
  ModelCosts c;
  for (std::size_t d = 0; d < D; ++d) {
    c.size_bits.push_back(100.0 + 4000.0 * rng.uniform());
    c.time_ns.push_back(10.0 + 200.0 * rng.uniform());
  }
  return c;
}

inline OptimizerParams toy_params(double lambda, std::size_t P, std::size_t K) {
  OptimizerParams p;
  p.target_fpr = 0.01;
  p.lambda = lambda;
  p.grid_size = P;
  p.regions = K;
  p.segments = 10;
  p.num_keys = 1000;
  p.memory_scale_bits = bits_oracle(1.0, 0.01, 1000);
  p.reject_scale_ns = 50.0;
  return p;
}

// Minimum objective over every depth and every trunk-exponent vector, with
// terminal rates forced to the optimal-rate formula.
inline double brute_force(const DepthProfile& prof, const ModelCosts& costs, const OptimizerParams& par) {
  const std::size_t Dmax = prof.max_depth(), P = par.grid_size;
  const double n = static_cast<double>(par.num_keys), budget = par.target_fpr * (1.0 - 1e-9);
  const double mw = par.lambda / par.memory_scale_bits;
  const double tw = par.lambda < 1.0 ? (1.0 - par.lambda) / par.reject_scale_ns : 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t D = 1; D <= Dmax; ++D) {
    std::size_t combos = 1;
    for (std::size_t d = 0; d < D; ++d) combos *= P;
    for (std::size_t code = 0; code < combos; ++code) {
      std::size_t rest = code, e = 0;
      double mem = 0.0, time = 0.0;
      for (std::size_t d = 0; d < D; ++d) {
        const std::size_t j = rest % P;
        rest /= P;
        const std::size_t c = std::min(e + j, P - 1);
        const double T = std::pow(par.p, static_cast<double>(c));
        mem += costs.size_bits[d] + bits_oracle(prof.g_trunk[d], std::pow(par.p, static_cast<double>(j)), n);
        time += costs.time_ns[d] * prof.h_trunk[d] * T;
        if (d + 1 < D) {
          mem += bits_oracle(prof.g_branch[d], rate_oracle(prof.g_branch[d], prof.h_branch[d] * T, budget), n);
        } else {
          for (std::size_t k = 0; k < prof.regions(); ++k) {
            mem += bits_oracle(prof.g_final[d][k], rate_oracle(prof.g_final[d][k], prof.h_final[d][k] * T, budget), n);
          }
        }
        e = c;
      }
      best = std::min(best, mw * mem + tw * time);
    }
  }
  return best;
}

}  // namespace clbf::oracle
