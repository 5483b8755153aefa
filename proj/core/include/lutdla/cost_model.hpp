#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "lutdla/dataflow.hpp"
#include "lutdla/vq.hpp"

namespace lutdla {

/// One hardware configuration of the accelerator as seen by the models.
struct DesignPoint {
  std::size_t v = 4;
  std::size_t c = 32;
  Metric metric = Metric::L2;
  DistPrecision dist_precision = DistPrecision::FP32;
  LutPrecision lut_precision = LutPrecision::INT8;
  std::size_t n_CCU = 1;
  std::size_t dpes = 0;        ///< dPEs per CCU chain, 0 for one per centroid
  std::size_t n_IMM = 1;
  std::size_t lut_banks = 16;  ///< lookup lanes per IMM
  std::size_t T_n = 16;
  std::size_t m_tile = 512;
  double beta = 0.0;           ///< bits per IMM cycle; infinity for unconstrained
  double clock_ratio = 1.0;    ///< ccm_freq / imm_freq
  unsigned bit_psum = 16;

  VQConfig vq() const { return VQConfig{v, c, metric, dist_precision, lut_precision}; }
  unsigned bit_lut() const;
  std::size_t chain_length() const { return dpes == 0 ? c : dpes; }
  std::size_t initiation_interval() const { return ceil_div(c, chain_length()); }
  friend bool operator==(const DesignPoint&, const DesignPoint&) = default;
};

unsigned lut_entry_bits(LutPrecision p);

enum class TauVariant {
  SubspaceCount, ///< OP_sim = alpha * c * M * v * ceil(K/v)
  AsPrinted,     ///< OP_sim = alpha * c * M * v * ceil(c/v)
};

struct TauTerms {
  double op_sim = 0, op_add = 0, total = 0;
};

/// 2 for L2 (multiply + add per element), 1 for L1 and Chebyshev.
double alpha_sim(Metric m);

TauTerms tau(const ProblemShape& shape, const VQConfig& vq, TauVariant variant = TauVariant::SubspaceCount);

struct PhiTerms {
  double mem_lut = 0, mem_out = 0, mem_in = 0, total = 0;  ///< bits
};

PhiTerms phi(const ProblemShape& shape, const VQConfig& vq, unsigned bit_lut, unsigned bit_out);

struct UnitCost {
  double area = 0, power = 0;
  friend bool operator==(const UnitCost&, const UnitCost&) = default;
};

/// Unit-relative cost library. Defaults are synthetic and only meaningful as
/// ratios; a calibration JSON with the same layout replaces them.
struct CostTables {
  UnitCost dpe_lane[3][2];   ///< per vector element, [metric][dist precision]
  UnitCost dpe_select[3][2]; ///< running-min compare/select per dPE
  UnitCost sram_bit;
  UnitCost adder;            ///< one accumulate lane in an IMM
  UnitCost other;

  static CostTables defaults();
  void validate() const;
  friend bool operator==(const CostTables&, const CostTables&) = default;
};

nlohmann::json to_json(const CostTables& t);
CostTables cost_tables_from_json(const nlohmann::json& j);
CostTables load_cost_tables(const std::filesystem::path& path);

UnitCost dpe_cost(const DesignPoint& p, const CostTables& t);
UnitCost ccu_cost(const DesignPoint& p, const CostTables& t);
UnitCost imm_cost(const DesignPoint& p, const CostTables& t);
/// area_IMM * n_IMM + area_CCU * n_CCU + area_other, and the same for power.
UnitCost area_power(const DesignPoint& p, const CostTables& t);

enum class LoadTerm {
  Total,     ///< every LUT slice of the schedule through one loader: M_o*N_c*N*c*bit_lut/beta
  AsPrinted, ///< c*bit_lut/beta*n_IMM
};

enum class Binding { Load, Sim, Lut };
std::string_view to_string(Binding b);

struct OmegaTerms {
  double load = 0, sim = 0, lut = 0, value = 0;
  Binding binding = Binding::Lut;
};

/// Cycle estimate max(load, sim, lut) in IMM cycles. Ties resolve lut, sim, load.
/// sim is M*N_c*II/(n_CCU*clock_ratio); lut is M*N_c*N/(n_IMM*lanes) with
/// lanes capped at T_n and n_IMM capped at ceil(N/T_n): lanes past the tile
/// width and IMMs past the column-tile count have nothing to do.
OmegaTerms omega(const ProblemShape& shape, const DesignPoint& p, LoadTerm load = LoadTerm::Total);

}  // namespace lutdla
