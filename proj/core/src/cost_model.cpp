#include "lutdla/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace lutdla {

unsigned lut_entry_bits(LutPrecision p) { return p == LutPrecision::INT8 ? 8 : 32; }

unsigned DesignPoint::bit_lut() const { return lut_entry_bits(lut_precision); }

double alpha_sim(Metric m) { return m == Metric::L2 ? 2.0 : 1.0; }

TauTerms tau(const ProblemShape& shape, const VQConfig& vq, TauVariant variant) {
  shape.validate();
  vq.validate();
  const double M = static_cast<double>(shape.M), N = static_cast<double>(shape.N);
  const double v = static_cast<double>(vq.v), c = static_cast<double>(vq.c);
  const double groups = static_cast<double>(vq.num_subspaces(shape.K));
  const double sim_groups = variant == TauVariant::SubspaceCount ? groups : static_cast<double>(ceil_div(vq.c, vq.v));
  TauTerms t;
  t.op_sim = alpha_sim(vq.metric) * c * M * v * sim_groups;
  t.op_add = M * N * groups;
  t.total = t.op_sim + t.op_add;
  return t;
}

PhiTerms phi(const ProblemShape& shape, const VQConfig& vq, unsigned bit_lut, unsigned bit_out) {
  shape.validate();
  vq.validate();
  const double M = static_cast<double>(shape.M), N = static_cast<double>(shape.N);
  const double groups = static_cast<double>(vq.num_subspaces(shape.K));
  PhiTerms p;
  p.mem_lut = N * static_cast<double>(vq.c) * groups * bit_lut;
  p.mem_out = M * N * bit_out;
  p.mem_in = groups * M * index_bits(vq.c);
  p.total = p.mem_lut + p.mem_out + p.mem_in;
  return p;
}

CostTables CostTables::defaults() {
  CostTables t{};
  // lane = subtract + (multiply | abs) + (add | max); BF16 roughly halves datapath cost
  const UnitCost lane_fp32[3] = {{1.00, 1.00}, {0.55, 0.50}, {0.45, 0.40}};
  const UnitCost select_fp32[3] = {{0.20, 0.15}, {0.20, 0.15}, {0.20, 0.15}};
  for (int m = 0; m < 3; ++m) {
    t.dpe_lane[m][0] = lane_fp32[m];
    t.dpe_lane[m][1] = {lane_fp32[m].area * 0.55, lane_fp32[m].power * 0.5};
    t.dpe_select[m][0] = select_fp32[m];
    t.dpe_select[m][1] = {select_fp32[m].area * 0.6, select_fp32[m].power * 0.6};
  }
  t.sram_bit = {2e-5, 1e-5};
  t.adder = {0.15, 0.12};
  t.other = {5.0, 2.0};
  return t;
}

void CostTables::validate() const {
  auto positive = [](const UnitCost& u, const char* what) {
    if (!(u.area > 0 && u.power > 0 && std::isfinite(u.area) && std::isfinite(u.power)))
      fail(ErrorKind::Configuration, std::string("cost table entry '") + what + "' must be positive");
  };
  for (int m = 0; m < 3; ++m)
    for (int p = 0; p < 2; ++p) {
      positive(dpe_lane[m][p], "dpe_lane");
      positive(dpe_select[m][p], "dpe_select");
    }
  positive(sram_bit, "sram_bit");
  positive(adder, "adder");
  positive(other, "other");
}

namespace {

constexpr Metric kMetricOrder[] = {Metric::L2, Metric::L1, Metric::Chebyshev};
constexpr DistPrecision kPrecOrder[] = {DistPrecision::FP32, DistPrecision::BF16};

int metric_slot(Metric m) { return m == Metric::L2 ? 0 : m == Metric::L1 ? 1 : 2; }
int prec_slot(DistPrecision p) { return p == DistPrecision::FP32 ? 0 : 1; }

nlohmann::json unit_json(const UnitCost& u) { return {{"area", u.area}, {"power", u.power}}; }

UnitCost unit_from(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("area") || !j.contains("power") || !j["area"].is_number() ||
      !j["power"].is_number())
    fail(ErrorKind::Configuration, "cost table: missing area/power at " + path);
  return {j["area"].get<double>(), j["power"].get<double>()};
}

const nlohmann::json& child(const nlohmann::json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorKind::Configuration, "cost table: missing entry " + path + key);
  return j.at(key);
}

}  // namespace

nlohmann::json to_json(const CostTables& t) {
  nlohmann::json j;
  for (Metric m : kMetricOrder)
    for (DistPrecision p : kPrecOrder) {
      const std::string mk(to_string(m)), pk(to_string(p));
      j["dpe_lane"][mk][pk] = unit_json(t.dpe_lane[metric_slot(m)][prec_slot(p)]);
      j["dpe_select"][mk][pk] = unit_json(t.dpe_select[metric_slot(m)][prec_slot(p)]);
    }
  j["sram_bit"] = unit_json(t.sram_bit);
  j["adder"] = unit_json(t.adder);
  j["other"] = unit_json(t.other);
  return j;
}

CostTables cost_tables_from_json(const nlohmann::json& j) {
  CostTables t{};
  for (const char* table : {"dpe_lane", "dpe_select"}) {
    const auto& tj = child(j, table, "");
    for (Metric m : kMetricOrder)
      for (DistPrecision p : kPrecOrder) {
        const std::string mk(to_string(m)), pk(to_string(p));
        const std::string path = std::string(table) + "." + mk + ".";
        const UnitCost u = unit_from(child(child(tj, mk, std::string(table) + "."), pk, path), path + pk);
        (std::string(table) == "dpe_lane" ? t.dpe_lane : t.dpe_select)[metric_slot(m)][prec_slot(p)] = u;
      }
  }
  t.sram_bit = unit_from(child(j, "sram_bit", ""), "sram_bit");
  t.adder = unit_from(child(j, "adder", ""), "adder");
  t.other = unit_from(child(j, "other", ""), "other");
  t.validate();
  return t;
}

CostTables load_cost_tables(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidInput, "cannot open cost tables " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Configuration, "cost tables " + path.string() + ": " + e.what());
  }
  return cost_tables_from_json(j);
}

UnitCost dpe_cost(const DesignPoint& p, const CostTables& t) {
  const UnitCost lane = t.dpe_lane[metric_slot(p.metric)][prec_slot(p.dist_precision)];
  const UnitCost sel = t.dpe_select[metric_slot(p.metric)][prec_slot(p.dist_precision)];
  const double v = static_cast<double>(p.v);
  return {v * lane.area + sel.area, v * lane.power + sel.power};
}

UnitCost ccu_cost(const DesignPoint& p, const CostTables& t) {
  const UnitCost dpe = dpe_cost(p, t);
  const double word = p.dist_precision == DistPrecision::FP32 ? 32.0 : 16.0;
  const double centroid_bits = static_cast<double>(p.c * p.v) * word;
  const double dpes = static_cast<double>(p.chain_length());
  return {dpes * dpe.area + centroid_bits * t.sram_bit.area,
          dpes * dpe.power + centroid_bits * t.sram_bit.power};
}

UnitCost imm_cost(const DesignPoint& p, const CostTables& t) {
  const double bits = 2.0 * static_cast<double>(p.c * p.T_n) * p.bit_lut() +
                      static_cast<double>(p.m_tile) * index_bits(p.c) +
                      static_cast<double>(p.m_tile * p.T_n) * p.bit_psum;
  const double lanes = static_cast<double>(p.lut_banks);
  return {bits * t.sram_bit.area + lanes * t.adder.area, bits * t.sram_bit.power + lanes * t.adder.power};
}

UnitCost area_power(const DesignPoint& p, const CostTables& t) {
  const UnitCost imm = imm_cost(p, t), ccu = ccu_cost(p, t);
  const double ni = static_cast<double>(p.n_IMM), nc = static_cast<double>(p.n_CCU);
  return {imm.area * ni + ccu.area * nc + t.other.area, imm.power * ni + ccu.power * nc + t.other.power};
}

std::string_view to_string(Binding b) {
  switch (b) {
    case Binding::Load: return "load";
    case Binding::Sim: return "sim";
    case Binding::Lut: return "lut";
  }
  return "?";
}

OmegaTerms omega(const ProblemShape& shape, const DesignPoint& p, LoadTerm load) {
  shape.validate();
  require(p.beta > 0, "omega: beta must be > 0");
  require(p.n_CCU >= 1 && p.n_IMM >= 1 && p.lut_banks >= 1 && p.T_n >= 1, "omega: unit counts must be >= 1");
  require(p.dpes <= p.c, "omega: dpes must not exceed c");
  require(p.clock_ratio > 0, "omega: clock ratio must be > 0");
  const double M = static_cast<double>(shape.M), N = static_cast<double>(shape.N);
  const double groups = static_cast<double>(ceil_div(shape.K, p.v));
  const double c = static_cast<double>(p.c), bl = p.bit_lut();
  const double m_tiles = static_cast<double>(ceil_div(shape.M, std::min(p.m_tile, shape.M)));

  OmegaTerms w;
  if (std::isinf(p.beta)) {
    w.load = 0.0;
  } else if (load == LoadTerm::Total) {
    w.load = m_tiles * groups * N * c * bl / p.beta;
  } else {
    w.load = c * bl / p.beta * static_cast<double>(p.n_IMM);
  }
  w.sim = M * groups * static_cast<double>(p.initiation_interval()) / static_cast<double>(p.n_CCU) /
          p.clock_ratio;
  // IMMs beyond the N_o column tiles get no work.
  const std::size_t imms = std::min(p.n_IMM, ceil_div(shape.N, p.T_n));
  w.lut = M * groups * N / static_cast<double>(imms * std::min(p.lut_banks, p.T_n));
  w.value = w.lut;
  w.binding = Binding::Lut;
  if (w.sim > w.value) {
    w.value = w.sim;
    w.binding = Binding::Sim;
  }
  if (w.load > w.value) {
    w.value = w.load;
    w.binding = Binding::Load;
  }
  return w;
}

}  // namespace lutdla
