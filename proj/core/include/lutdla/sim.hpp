#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lutdla/cost_model.hpp"
#include "lutdla/dataflow.hpp"
#include "lutdla/vq.hpp"

namespace lutdla {

struct HwConfig {
  std::size_t n_CCU = 1;
  std::size_t dpes = 0;          ///< dPEs per CCU chain; 0 means one per centroid
  std::size_t n_IMM = 1;
  std::size_t lut_banks = 16;    ///< lookup lanes per IMM
  std::size_t fifo_depth = 8;
  std::size_t fifo_sync = 2;     ///< synchroniser latency, IMM cycles
  std::uint32_t ccm_freq = 1;    ///< only the ratio to imm_freq matters
  std::uint32_t imm_freq = 1;
  double beta = std::numeric_limits<double>::infinity();  ///< bits per IMM cycle
  TileConfig tile;
  std::size_t swap_penalty = 0;  ///< IMM cycles lost on every bank swap
  bool overlap_drain = false;    ///< scratchpad write-back hidden behind compute

  void validate(const ProblemShape& shape, const VQConfig& vq) const;
  std::size_t chain_length(std::size_t c) const { return dpes == 0 ? c : dpes; }
  /// CCM cycles between successive subvectors entering one CCU.
  std::size_t initiation_interval(std::size_t c) const { return ceil_div(c, chain_length(c)); }
};

struct SimOptions {
  std::uint64_t max_cycles = 2'000'000'000ULL;  ///< IMM cycles before giving up
  std::ostream* trace = nullptr;                ///< JSON-lines events when set
  // Functional mode: real indices and accumulation when all three are set.
  const Matrix* a = nullptr;
  const Matrix* b = nullptr;
  const Codebook* codebook = nullptr;
};

struct ImmStalls {
  std::uint64_t busy = 0, fifo_empty = 0, bandwidth = 0, lut_load = 0, drain = 0, tail = 0;
  std::uint64_t sum() const { return busy + fifo_empty + bandwidth + lut_load + drain + tail; }
  friend bool operator==(const ImmStalls&, const ImmStalls&) = default;
};

struct CcmStalls {
  std::uint64_t busy = 0, fifo_full = 0, idle = 0;  ///< CCM cycles
  friend bool operator==(const CcmStalls&, const CcmStalls&) = default;
};

struct SimTrace {
  std::uint64_t total_cycles = 0;  ///< IMM cycles
  std::uint64_t ccm_cycles = 0;
  std::size_t active_imms = 0;     ///< IMMs the tile mapper used
  std::vector<ImmStalls> imm;      ///< per IMM, each partitions total_cycles
  ImmStalls imm_total;
  CcmStalls ccm;
  std::vector<std::size_t> fifo_high_water;
  double loader_busy_cycles = 0;
  std::uint64_t lut_loads = 0;
  std::uint64_t index_steps = 0;      ///< (m, k, n-tile) lookups issued
  std::uint64_t lane_lookups = 0;     ///< individual entry reads, M*N_c*N when complete
  std::uint64_t indices_produced = 0;
  std::uint64_t reads_from_loading_bank = 0;
  std::uint64_t causality_violations = 0;
  double util_ccm = 0, util_loader = 0, util_imm = 0;
  Binding dominant = Binding::Lut;
  bool functional = false;
  Matrix output;

  friend bool operator==(const SimTrace&, const SimTrace&) = default;
};

/// Cycle-level model of the decoupled CCM/IMM datapath running the
/// LUT-stationary schedule. Throws Deadlock when nothing can progress or the
/// cycle guard is exceeded.
SimTrace simulate(const ProblemShape& shape, const VQConfig& vq, const HwConfig& hw,
                  const SimOptions& options = {});

nlohmann::json to_json(const SimTrace& t);

struct SteadyStateReport {
  OmegaTerms model;
  std::uint64_t simulated = 0;
  double relative_error = 0;  ///< |sim - omega| / sim
  Binding sim_binding = Binding::Lut;
  bool binding_agrees = false;
};

DesignPoint design_point(const VQConfig& vq, const HwConfig& hw);

SteadyStateReport steady_state_check(const SimTrace& trace, const HwConfig& hw, const ProblemShape& shape,
                                     const VQConfig& vq, LoadTerm load = LoadTerm::Total);

/// Runs the simulator in functional mode and checks its output against
/// ls_execute; throws Corruption naming the first differing (m, n).
Matrix replay_functional(const Matrix& a, const Matrix& b, const VQConfig& vq, const Codebook& codebook,
                         const HwConfig& hw);

}  // namespace lutdla
