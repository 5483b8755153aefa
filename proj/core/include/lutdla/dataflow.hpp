#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "lutdla/matrix.hpp"
#include "lutdla/vq.hpp"

namespace lutdla {

struct TileConfig {
  std::size_t T_n = 16;     ///< output tile width
  std::size_t M_tile = 512; ///< rows resident per pass

  void validate(const ProblemShape& shape) const;
  std::size_t num_n_tiles(std::size_t N) const { return ceil_div(N, T_n); }
  std::size_t num_m_tiles(std::size_t M) const { return ceil_div(M, M_tile); }
};

struct BitWidths {
  unsigned bit_lut = 8;
  unsigned bit_idx = 5;
  unsigned bit_psum = 16;
  unsigned bit_out = 16;

  /// Defaults with bit_idx = ceil(log2 c).
  static BitWidths for_centroids(std::size_t c);
  void validate() const;
};

/// Loop order from outer to inner; LS is n-tile -> k -> m.
enum class DataflowKind { MNK, NMK, MKN, KMN, KNM, LS };

inline constexpr DataflowKind kAllDataflows[] = {DataflowKind::MNK, DataflowKind::NMK,
                                                 DataflowKind::MKN, DataflowKind::KMN,
                                                 DataflowKind::KNM, DataflowKind::LS};

std::string_view to_string(DataflowKind k);
DataflowKind parse_dataflow(std::string_view s);

enum class IndexPolicy {
  Streaming, ///< LS keeps one index per resident row; indices are regenerated per n-tile
  CacheAll,  ///< LS keeps every index of the resident rows
};

struct MemoryFootprint {
  std::uint64_t scratchpad_bits = 0;
  std::uint64_t indices_bits = 0;
  std::uint64_t psumlut_bits = 0;
  std::uint64_t total_bits = 0;
  bool psumlut_ping_pong = false;

  static double kib(std::uint64_t bits) { return static_cast<double>(bits) / 8.0 / 1024.0; }
};

/// Smallest buffers for which no PSum LUT region is fetched twice.
///
///   kind  scratchpad            indices              psumlut
///   MNK   T_n*psum              N_c*idx              N_c*c*N*lut
///   NMK   T_n*psum              M*N_c*idx            N_c*c*T_n*lut
///   MKN   N*psum                idx                  N_c*c*N*lut
///   KMN   M*N*psum              idx                  c*N*lut
///   KNM   M*N*psum              M*idx                c*T_n*lut
///   LS    M_tile*T_n*psum       M_tile*idx (*N_c)    2*c*T_n*lut
MemoryFootprint footprint(DataflowKind kind, const ProblemShape& shape, const VQConfig& vq,
                          const TileConfig& tile, const BitWidths& widths,
                          IndexPolicy policy = IndexPolicy::Streaming);

struct LsStats {
  std::uint64_t get_index_calls = 0; ///< one call encodes a full row
  std::uint64_t lut_loads = 0;       ///< (n-tile, k) slices brought on chip
  std::uint64_t lookups = 0;         ///< (m, k, n-tile) query-and-accumulate steps
};

/// Untimed LUT-stationary executor. Loops n-tile -> k -> m; at k == 0 of every
/// n-tile each row is encoded once into the indices buffer. Output is
/// bit-identical to lut_gemm on the same table.
Matrix ls_execute(const Matrix& a, const Matrix& b, const VQConfig& vq, const Codebook& codebook,
                  const TileConfig& tile, LsStats* stats = nullptr);

/// Off-chip bandwidth (bits/s) that keeps the IMM busy: T_n * N_c / M_tile * freq
/// scaled by the c * bit_lut bits of one LUT slice.
double min_bandwidth(const ProblemShape& shape, const VQConfig& vq, const TileConfig& tile,
                     unsigned bit_lut, double freq_hz);

struct FootprintRow {
  DataflowKind kind;
  ProblemShape shape;
  VQConfig vq;
  TileConfig tile;
  BitWidths widths;
  MemoryFootprint fp;
};

void write_footprint_csv(std::ostream& out, const std::vector<FootprintRow>& rows);

}  // namespace lutdla
