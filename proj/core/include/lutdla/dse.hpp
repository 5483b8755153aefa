#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lutdla/cost_model.hpp"
#include "lutdla/nn.hpp"
#include "lutdla/train.hpp"

namespace lutdla {

/// Cross product of the listed values. n_IMM lists the starting points of
/// the expansion step; max_n_IMM caps it.
struct SearchSpace {
  std::vector<std::size_t> v = {2, 4, 8};
  std::vector<std::size_t> c = {8, 16, 32, 64};
  std::vector<Metric> metric = {Metric::L2};
  std::vector<DistPrecision> dist_precision = {DistPrecision::FP32};
  std::vector<LutPrecision> lut_precision = {LutPrecision::INT8};
  std::vector<std::size_t> n_CCU = {1};
  std::vector<std::size_t> n_IMM = {1};
  std::vector<std::size_t> lut_banks = {16};
  std::vector<std::size_t> T_n = {16};
  std::vector<double> beta = {std::numeric_limits<double>::infinity()};  ///< bits per IMM cycle
  std::size_t dpes = 0;
  std::size_t m_tile = 512;
  std::size_t max_n_IMM = 16;  ///< further capped by the number of N tiles

  void validate() const;
  std::size_t size() const;
  /// Deterministic order: v, c, metric, dist, lut, n_CCU, n_IMM, banks, T_n, beta.
  std::vector<DesignPoint> enumerate() const;
};

struct Constraints {
  double max_tau_ratio = 1.0;  ///< tau <= ratio * 2MKN
  double max_phi_ratio = 2.0;  ///< phi <= ratio * (MK + KN + MN) * width
  unsigned width = 16;         ///< dense operand width and bit_out
  double max_area = 1e9;
  double max_power = 1e9;
  double min_accuracy = 0.0;

  void validate() const;
};

/// Accuracy estimate for a design; only v, c, metric and precisions matter.
using AccuracyProbe = std::function<double(const DesignPoint&)>;

struct SearchOptions {
  LoadTerm load = LoadTerm::Total;
  TauVariant tau = TauVariant::SubspaceCount;
};

struct Evaluation {
  DesignPoint point;
  TauTerms tau;
  PhiTerms phi;
  UnitCost cost;
  OmegaTerms omega;
  std::optional<double> accuracy;
  std::size_t n_IMM_before_expansion = 0;
  std::vector<std::string> violations;  ///< constraint names, empty for survivors
};

Evaluation evaluate(const ProblemShape& shape, const DesignPoint& p, const CostTables& tables,
                    const SearchOptions& opt = {}, unsigned bit_out = 16);

double dense_ops(const ProblemShape& shape);
double dense_bits(const ProblemShape& shape, unsigned width);

struct StepLog {
  std::string name;
  std::size_t candidates = 0;
  std::vector<Evaluation> survivors;
  std::vector<Evaluation> removed;
  std::map<std::string, std::size_t> removed_by;  ///< a point can count toward several

  /// Constraint that removed the most points, empty when nothing was removed.
  std::string binding() const;
};

struct SearchResult {
  bool feasible = false;
  std::array<StepLog, 4> steps;
  std::vector<Evaluation> ranked;
  std::string diagnostic;  ///< set when infeasible
};

/// The four-step co-design search. `probe` is called once per distinct
/// (v, c, metric, precisions); without a probe Step 3 keeps everything.
/// Never throws for an empty result: check `feasible`.
SearchResult search(const ProblemShape& shape, const SearchSpace& space, const Constraints& constraints,
                    const CostTables& tables, const AccuracyProbe& probe, const SearchOptions& opt = {});

/// Total order: omega, area, v, c, then the remaining fields.
bool rank_before(const Evaluation& a, const Evaluation& b);

/// step,v,c,points,survivors,best_omega,best_area; one row per (step, v, c).
void write_heatmap_csv(std::ostream& out, const SearchResult& result);

nlohmann::json to_json(const Evaluation& e);
nlohmann::json to_json(const SearchResult& r);

/// Probe backed by the toy trainer: one dense net pretrained on `train`,
/// then substitute + centroid-only stage for `budget` iterations per design.
AccuracyProbe make_toy_probe(const Dataset& train, const Dataset& val, std::size_t budget,
                             const PipelineConfig& base = {});

}  // namespace lutdla
