#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "lutdla/matrix.hpp"

namespace lutdla {

struct ProblemShape {
  std::size_t M = 1;
  std::size_t K = 1;
  std::size_t N = 1;

  void validate() const;
  friend bool operator==(const ProblemShape&, const ProblemShape&) = default;
};

enum class Metric { L2, L1, Chebyshev };
enum class DistPrecision { FP32, BF16 };
enum class LutPrecision { FP32, INT8 };

std::string_view to_string(Metric m);
std::string_view to_string(DistPrecision p);
std::string_view to_string(LutPrecision p);
Metric parse_metric(std::string_view s);
DistPrecision parse_dist_precision(std::string_view s);
LutPrecision parse_lut_precision(std::string_view s);

constexpr std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

/// ceil(log2(c)); 0 for c == 1.
unsigned index_bits(std::size_t c);

struct VQConfig {
  std::size_t v = 4;  ///< subvector length
  std::size_t c = 16; ///< centroids per codebook
  Metric metric = Metric::L2;
  DistPrecision dist_precision = DistPrecision::FP32;
  LutPrecision lut_precision = LutPrecision::FP32;

  /// Checks v >= 1 and c >= 1. Codebook learning additionally needs c >= 2,
  /// which kmeans_fit enforces.
  void validate() const;
  friend bool operator==(const VQConfig&, const VQConfig&) = default;
  std::size_t num_subspaces(std::size_t K) const { return ceil_div(K, v); }
  /// ceil(log2 c) / v bits per input element after index encoding.
  double equivalent_bits() const { return static_cast<double>(index_bits(c)) / static_cast<double>(v); }
};

/// Round-to-nearest-even onto the bfloat16 grid (8-bit significand).
float round_to_bf16(float x);

/// L2 is the squared Euclidean distance (no square root), L1 the sum of
/// absolute differences, Chebyshev the largest absolute difference.
double distance(std::span<const double> x, std::span<const double> z, Metric metric);

/// Same as above with operands rounded to `precision` and accumulation in
/// single precision, as a reduced-precision distance unit would do it.
double distance(std::span<const double> x, std::span<const double> z, Metric metric,
                DistPrecision precision);

/// Column-wise split of `a` into ceil(K/v) blocks of M x v; the last block is
/// zero-padded when K is not a multiple of v.
std::vector<Matrix> partition(const Matrix& a, std::size_t v);

/// Zero-pads `b` to ceil(K/v)*v rows so its row blocks line up with partition().
Matrix pad_rows(const Matrix& b, std::size_t v);

struct Codebook {
  std::size_t K = 0;              ///< unpadded inner dimension the codebook was built for
  std::size_t v = 0;
  std::vector<Matrix> centroids;  ///< one c x v matrix per subspace

  std::size_t num_subspaces() const { return centroids.size(); }
  std::size_t c() const { return centroids.empty() ? 0 : centroids.front().rows(); }
  std::span<const double> centroid(std::size_t k, std::size_t j) const { return centroids[k].row(j); }
  std::span<double> centroid(std::size_t k, std::size_t j) { return centroids[k].row(j); }

  void validate() const;
  friend bool operator==(const Codebook&, const Codebook&) = default;
};

/// Gaussian centroids, used as the untrained starting point of single-stage training.
Codebook random_codebook(std::size_t K, std::size_t v, std::size_t c, std::uint64_t seed,
                         double stddev = 1.0);

struct EncodedMatrix {
  std::size_t rows = 0;
  std::size_t subspaces = 0;
  std::size_t c = 0;
  std::vector<std::uint32_t> indices;  ///< rows x subspaces, row-major

  std::uint32_t at(std::size_t m, std::size_t k) const { return indices[m * subspaces + k]; }
  friend bool operator==(const EncodedMatrix&, const EncodedMatrix&) = default;
};

/// Precomputed centroid x weight partial products, indexed (subspace, centroid,
/// output column). Entries are held as the exact values of the storage format:
/// FP32 values rounded to float, INT8 values as code * scale with one
/// symmetric scale per (subspace, output tile).
class PSumTable {
 public:
  PSumTable() = default;

  std::size_t num_subspaces() const noexcept { return subspaces_; }
  std::size_t centroids() const noexcept { return c_; }
  std::size_t cols() const noexcept { return n_; }
  std::size_t tile_n() const noexcept { return tile_n_; }
  std::size_t num_tiles() const noexcept { return ceil_div(n_, tile_n_); }
  LutPrecision precision() const noexcept { return precision_; }

  double entry(std::size_t k, std::size_t j, std::size_t n) const noexcept {
    return values_[(k * c_ + j) * n_ + n];
  }
  /// Row of N entries for (subspace k, centroid j).
  std::span<const double> entries(std::size_t k, std::size_t j) const noexcept {
    return {values_.data() + (k * c_ + j) * n_, n_};
  }

  const std::vector<std::int8_t>& codes() const noexcept { return codes_; }
  const std::vector<double>& scales() const noexcept { return scales_; }
  double scale(std::size_t k, std::size_t tile) const { return scales_.at(k * num_tiles() + tile); }

  /// N * c * N_c * bit_lut, the LUT memory term of the memory model.
  std::uint64_t size_bits(unsigned bit_lut) const;

  static PSumTable from_fp32(std::size_t subspaces, std::size_t c, std::size_t n,
                             std::size_t tile_n, std::vector<float> values);
  static PSumTable from_int8(std::size_t subspaces, std::size_t c, std::size_t n,
                             std::size_t tile_n, std::vector<std::int8_t> codes,
                             std::vector<double> scales);

  friend bool operator==(const PSumTable&, const PSumTable&) = default;

 private:
  std::size_t subspaces_ = 0;
  std::size_t c_ = 0;
  std::size_t n_ = 0;
  std::size_t tile_n_ = 1;
  LutPrecision precision_ = LutPrecision::FP32;
  std::vector<double> values_;
  std::vector<std::int8_t> codes_;
  std::vector<double> scales_;
};

/// Lloyd/k-means codebook per subspace; subspace k uses mix_seed(seed, k).
Codebook fit_codebook(const Matrix& a, const VQConfig& cfg, std::uint64_t seed,
                      std::size_t max_iterations = 100);

/// Running argmin over the codebook of subspace k; ties go to the lowest index.
std::pair<std::uint32_t, double> nearest_centroid(std::span<const double> x, const Matrix& centroids,
                                                  Metric metric, DistPrecision precision);

/// Indices of one input row, one per subspace, written to `out`.
void encode_row(std::span<const double> row, const Codebook& codebook, Metric metric,
                DistPrecision precision, std::span<std::uint32_t> out);

EncodedMatrix encode(const Matrix& a, const Codebook& codebook, Metric metric,
                     DistPrecision precision);

/// Centroid reconstruction of the encoded input, trimmed back to K columns.
Matrix decode(const EncodedMatrix& encoded, const Codebook& codebook);

/// `tile_n` only matters for INT8 scales; 0 means one tile spanning all of N.
PSumTable build_lut(const Codebook& codebook, const Matrix& b, LutPrecision precision,
                    std::size_t tile_n = 0);

Matrix lut_gemm(const EncodedMatrix& encoded, const PSumTable& table);

/// Reference product, i-k-j order in double precision.
Matrix exact_gemm(const Matrix& a, const Matrix& b);

struct AmmError {
  double frobenius_rel = 0.0;  ///< NaN when the exact product is all zero
  double frobenius_abs = 0.0;
  double max_abs = 0.0;
  bool zero_norm = false;
};

AmmError compare_products(const Matrix& approx, const Matrix& exact);

/// Encodes `a`, builds the table for `b` and measures lut_gemm against exact_gemm.
AmmError amm_error(const Matrix& a, const Matrix& b, const VQConfig& cfg, const Codebook& codebook);

}  // namespace lutdla
