#pragma once

// Exhaustive evaluation of the same models the search uses. Every point is
// checked against every constraint directly, and the expansion step is
// replaced by trying every n_IMM from the starting value up to the cap.

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include "lutdla/dse.hpp"
#include "lutdla/rng.hpp"

namespace lutdla::testing {

struct BruteForce {
  std::vector<DesignPoint> step1, step2, step3;
  std::vector<DesignPoint> ranked;
};

inline BruteForce brute_force_search(const ProblemShape& shape, const SearchSpace& space, const Constraints& k,
                                     const CostTables& tables, const AccuracyProbe& probe) {
  BruteForce out;
  const double ops = k.max_tau_ratio * 2.0 * double(shape.M) * double(shape.K) * double(shape.N);
  const double bits =
      k.max_phi_ratio * (double(shape.M) * double(shape.K) + double(shape.K) * double(shape.N) +
                         double(shape.M) * double(shape.N)) * k.width;
  struct Row {
    double omega, area;
    DesignPoint p;
  };
  std::vector<Row> rows;
  for (const DesignPoint& p : space.enumerate()) {
    if (tau(shape, p.vq()).total > ops || phi(shape, p.vq(), p.bit_lut(), k.width).total > bits) continue;
    out.step1.push_back(p);
    const UnitCost cost = area_power(p, tables);
    if (cost.area > k.max_area || cost.power > k.max_power) continue;
    out.step2.push_back(p);
    if (probe && probe(p) < k.min_accuracy) continue;
    out.step3.push_back(p);

    const std::size_t cap = std::min(space.max_n_IMM, (shape.N + p.T_n - 1) / p.T_n);
    Row best{omega(shape, p).value, cost.area, p};
    for (std::size_t n = p.n_IMM + 1; n <= cap; ++n) {
      DesignPoint q = p;
      q.n_IMM = n;
      const UnitCost cq = area_power(q, tables);
      if (cq.area > k.max_area || cq.power > k.max_power) break;  // cost grows with n_IMM
      const double w = omega(shape, q).value;
      if (std::tie(w, cq.area) < std::tie(best.omega, best.area)) best = Row{w, cq.area, q};
    }
    rows.push_back(best);
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    const DesignPoint &p = a.p, &q = b.p;
    return std::tuple{a.omega, a.area, p.v, p.c, p.metric, p.dist_precision, p.lut_precision, p.n_CCU, p.n_IMM,
                      p.lut_banks, p.T_n, p.beta} < std::tuple{b.omega, b.area, q.v, q.c, q.metric,
                                                               q.dist_precision, q.lut_precision, q.n_CCU,
                                                               q.n_IMM, q.lut_banks, q.T_n, q.beta};
  });
  for (const Row& r : rows) out.ranked.push_back(r.p);
  return out;
}

inline std::vector<DesignPoint> points_of(const std::vector<Evaluation>& es) {
  std::vector<DesignPoint> out;
  for (const Evaluation& e : es) out.push_back(e.point);
  return out;
}

/// Deterministic stand-in for the accuracy probe: more bits per element
/// scores higher, L1 and Chebyshev a little lower than L2.
inline double fake_accuracy(const DesignPoint& p) {
  const double bits = std::log2(double(p.c)) / double(p.v);
  const double metric = p.metric == Metric::L2 ? 0.0 : p.metric == Metric::L1 ? 0.01 : 0.03;
  return std::min(1.0, 0.5 + 0.2 * bits) - metric;
}

/// Random bounds drawn between the smallest and largest value each model
/// takes over the space, so some constraints bind and some do not.
inline Constraints random_constraints(const ProblemShape& shape, const SearchSpace& space, const CostTables& tables,
                                      Rng& rng) {
  double lo_area = 1e300, hi_area = 0, lo_power = 1e300, hi_power = 0;
  double lo_tau = 1e300, hi_tau = 0, lo_phi = 1e300, hi_phi = 0;
  const double ops = 2.0 * double(shape.M) * double(shape.K) * double(shape.N);
  const double bits = (double(shape.M) * double(shape.K) + double(shape.K) * double(shape.N) +
                       double(shape.M) * double(shape.N)) * 16.0;
  for (const DesignPoint& p : space.enumerate()) {
    DesignPoint big = p;
    big.n_IMM = space.max_n_IMM;
    const UnitCost a = area_power(p, tables), b = area_power(big, tables);
    lo_area = std::min(lo_area, a.area);
    hi_area = std::max(hi_area, b.area);
    lo_power = std::min(lo_power, a.power);
    hi_power = std::max(hi_power, b.power);
    const double t = tau(shape, p.vq()).total / ops, f = phi(shape, p.vq(), p.bit_lut(), 16).total / bits;
    lo_tau = std::min(lo_tau, t);
    hi_tau = std::max(hi_tau, t);
    lo_phi = std::min(lo_phi, f);
    hi_phi = std::max(hi_phi, f);
  }
  auto pick = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(-0.1, 1.2); };
  Constraints k;
  k.max_tau_ratio = std::max(1e-9, pick(lo_tau, hi_tau));
  k.max_phi_ratio = std::max(1e-9, pick(lo_phi, hi_phi));
  k.max_area = std::max(1e-9, pick(lo_area, hi_area));
  k.max_power = std::max(1e-9, pick(lo_power, hi_power));
  k.min_accuracy = std::clamp(rng.uniform(0.4, 1.0), 0.0, 1.0);
  return k;
}

}  // namespace lutdla::testing
