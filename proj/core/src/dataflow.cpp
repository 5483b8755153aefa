#include "lutdla/dataflow.hpp"

#include <algorithm>
#include <ostream>
#include <span>
#include <string>

namespace lutdla {

void TileConfig::validate(const ProblemShape& shape) const {
  require(T_n >= 1 && T_n <= shape.N, "tile: T_n must be in [1, N]");
  require(M_tile >= 1 && M_tile <= shape.M, "tile: M_tile must be in [1, M]");
}

BitWidths BitWidths::for_centroids(std::size_t c) {
  BitWidths w;
  w.bit_idx = std::max(1u, index_bits(c));
  return w;
}

void BitWidths::validate() const {
  require(bit_lut >= 1 && bit_idx >= 1 && bit_psum >= 1 && bit_out >= 1, "bit widths must be >= 1");
}

std::string_view to_string(DataflowKind k) {
  switch (k) {
    case DataflowKind::MNK: return "MNK";
    case DataflowKind::NMK: return "NMK";
    case DataflowKind::MKN: return "MKN";
    case DataflowKind::KMN: return "KMN";
    case DataflowKind::KNM: return "KNM";
    case DataflowKind::LS: return "LS";
  }
  return "?";
}

DataflowKind parse_dataflow(std::string_view s) {
  for (DataflowKind k : kAllDataflows)
    if (s == to_string(k)) return k;
  fail(ErrorKind::InvalidInput, "unknown dataflow '" + std::string(s) + "'");
}

MemoryFootprint footprint(DataflowKind kind, const ProblemShape& shape, const VQConfig& vq,
                          const TileConfig& tile, const BitWidths& widths, IndexPolicy policy) {
  shape.validate();
  vq.validate();
  tile.validate(shape);
  widths.validate();
  const std::uint64_t M = shape.M, N = shape.N, Nc = vq.num_subspaces(shape.K), c = vq.c;
  const std::uint64_t Tn = tile.T_n, Mt = tile.M_tile;
  const std::uint64_t lut = widths.bit_lut, idx = widths.bit_idx, psum = widths.bit_psum;

  MemoryFootprint fp;
  switch (kind) {
    case DataflowKind::MNK:
      fp.scratchpad_bits = Tn * psum;
      fp.indices_bits = Nc * idx;
      fp.psumlut_bits = Nc * c * N * lut;
      break;
    case DataflowKind::NMK:
      fp.scratchpad_bits = Tn * psum;
      fp.indices_bits = M * Nc * idx;
      fp.psumlut_bits = Nc * c * Tn * lut;
      break;
    case DataflowKind::MKN:
      fp.scratchpad_bits = N * psum;
      fp.indices_bits = idx;
      fp.psumlut_bits = Nc * c * N * lut;
      break;
    case DataflowKind::KMN:
      fp.scratchpad_bits = M * N * psum;
      fp.indices_bits = idx;
      fp.psumlut_bits = c * N * lut;
      break;
    case DataflowKind::KNM:
      fp.scratchpad_bits = M * N * psum;
      fp.indices_bits = M * idx;
      fp.psumlut_bits = c * Tn * lut;
      break;
    case DataflowKind::LS:
      fp.scratchpad_bits = Mt * Tn * psum;
      fp.indices_bits = Mt * idx * (policy == IndexPolicy::CacheAll ? Nc : 1);
      fp.psumlut_bits = 2 * c * Tn * lut;
      fp.psumlut_ping_pong = true;
      break;
  }
  fp.total_bits = fp.scratchpad_bits + fp.indices_bits + fp.psumlut_bits;
  return fp;
}

Matrix ls_execute(const Matrix& a, const Matrix& b, const VQConfig& vq, const Codebook& codebook,
                  const TileConfig& tile, LsStats* stats) {
  require(a.cols() == b.rows(), "ls_execute: inner dimensions disagree");
  const ProblemShape shape{a.rows(), a.cols(), b.cols()};
  shape.validate();
  tile.validate(shape);
  require(codebook.K == shape.K && codebook.v == vq.v, "ls_execute: codebook does not match K/v");

  const PSumTable table = build_lut(codebook, b, vq.lut_precision, tile.T_n);
  const std::size_t M = shape.M, N = shape.N, Nc = codebook.num_subspaces();
  const std::size_t c = codebook.c();
  LsStats local;
  LsStats& st = stats ? *stats : local;

  Matrix out(M, N);
  std::vector<std::uint32_t> indices(M * Nc);  // indices buffer, one row slot per m
  for (std::size_t n0 = 0; n0 < N; n0 += tile.T_n) {
    const std::size_t n1 = std::min(N, n0 + tile.T_n);
    for (std::size_t k = 0; k < Nc; ++k) {
      ++st.lut_loads;
      for (std::size_t m = 0; m < M; ++m) {
        auto row_idx = std::span(indices).subspan(m * Nc, Nc);
        if (k == 0) {
          encode_row(a.row(m), codebook, vq.metric, vq.dist_precision, row_idx);
          ++st.get_index_calls;
        }
        const std::uint32_t j = row_idx[k];
        if (j >= c) fail(ErrorKind::Corruption, "ls_execute: index out of range");
        const auto lut_row = table.entries(k, j);
        for (std::size_t n = n0; n < n1; ++n) out(m, n) += lut_row[n];
        ++st.lookups;
      }
    }
  }
  return out;
}

double min_bandwidth(const ProblemShape& shape, const VQConfig& vq, const TileConfig& tile,
                     unsigned bit_lut, double freq_hz) {
  tile.validate(shape);
  const double Nc = static_cast<double>(vq.num_subspaces(shape.K));
  return static_cast<double>(tile.T_n) * Nc / static_cast<double>(tile.M_tile) * freq_hz *
         static_cast<double>(bit_lut) * static_cast<double>(vq.c);
}

void write_footprint_csv(std::ostream& out, const std::vector<FootprintRow>& rows) {
  out << "kind,M,K,N,v,c,T_n,M_tile,bit_lut,bit_idx,bit_psum,scratchpad_bytes,indices_bytes,"
         "psumlut_bytes,total_bytes\n";
  for (const auto& r : rows) {
    out << to_string(r.kind) << ',' << r.shape.M << ',' << r.shape.K << ',' << r.shape.N << ','
        << r.vq.v << ',' << r.vq.c << ',' << r.tile.T_n << ',' << r.tile.M_tile << ','
        << r.widths.bit_lut << ',' << r.widths.bit_idx << ',' << r.widths.bit_psum << ','
        << static_cast<double>(r.fp.scratchpad_bits) / 8.0 << ','
        << static_cast<double>(r.fp.indices_bits) / 8.0 << ','
        << static_cast<double>(r.fp.psumlut_bits) / 8.0 << ','
        << static_cast<double>(r.fp.total_bits) / 8.0 << '\n';
  }
}

}  // namespace lutdla
