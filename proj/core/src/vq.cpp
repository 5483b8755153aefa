#include "lutdla/vq.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "lutdla/kmeans.hpp"
#include "lutdla/rng.hpp"

namespace lutdla {

void ProblemShape::validate() const {
  require(M >= 1 && K >= 1 && N >= 1, "problem shape must have M, K, N >= 1");
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::L2: return "L2";
    case Metric::L1: return "L1";
    case Metric::Chebyshev: return "Chebyshev";
  }
  return "?";
}

std::string_view to_string(DistPrecision p) { return p == DistPrecision::FP32 ? "FP32" : "BF16"; }
std::string_view to_string(LutPrecision p) { return p == LutPrecision::FP32 ? "FP32" : "INT8"; }

Metric parse_metric(std::string_view s) {
  if (s == "L2" || s == "l2") return Metric::L2;
  if (s == "L1" || s == "l1") return Metric::L1;
  if (s == "Chebyshev" || s == "chebyshev" || s == "Linf" || s == "linf") return Metric::Chebyshev;
  fail(ErrorKind::InvalidInput, "unknown metric '" + std::string(s) + "'");
}

DistPrecision parse_dist_precision(std::string_view s) {
  if (s == "FP32" || s == "fp32") return DistPrecision::FP32;
  if (s == "BF16" || s == "bf16") return DistPrecision::BF16;
  fail(ErrorKind::InvalidInput, "unknown distance precision '" + std::string(s) + "'");
}

LutPrecision parse_lut_precision(std::string_view s) {
  if (s == "FP32" || s == "fp32") return LutPrecision::FP32;
  if (s == "INT8" || s == "int8") return LutPrecision::INT8;
  fail(ErrorKind::InvalidInput, "unknown LUT precision '" + std::string(s) + "'");
}

unsigned index_bits(std::size_t c) {
  unsigned bits = 0;
  while ((std::size_t{1} << bits) < c) ++bits;
  return bits;
}

void VQConfig::validate() const {
  require(v >= 1, "VQ config: subvector length v must be >= 1");
  require(c >= 1, "VQ config: centroid count c must be >= 1");
}

float round_to_bf16(float x) {
  if (std::isnan(x)) return x;
  std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
  const std::uint32_t lsb = (bits >> 16) & 1u;
  bits += 0x7fffu + lsb;
  bits &= 0xffff0000u;
  return std::bit_cast<float>(bits);
}

double distance(std::span<const double> x, std::span<const double> z, Metric metric) {
  require(x.size() == z.size(), "distance: operand lengths differ");
  double acc = 0.0;
  switch (metric) {
    case Metric::L2:
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - z[i];
        acc += d * d;
      }
      break;
    case Metric::L1:
      for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - z[i]);
      break;
    case Metric::Chebyshev:
      for (std::size_t i = 0; i < x.size(); ++i) acc = std::max(acc, std::abs(x[i] - z[i]));
      break;
  }
  return acc;
}

double distance(std::span<const double> x, std::span<const double> z, Metric metric,
                DistPrecision precision) {
  require(x.size() == z.size(), "distance: operand lengths differ");
  const bool bf16 = precision == DistPrecision::BF16;
  auto load = [bf16](double value) {
    const float f = static_cast<float>(value);
    return bf16 ? round_to_bf16(f) : f;
  };
  float acc = 0.0f;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float d = load(x[i]) - load(z[i]);
    switch (metric) {
      case Metric::L2: acc += d * d; break;
      case Metric::L1: acc += std::abs(d); break;
      case Metric::Chebyshev: acc = std::max(acc, std::abs(d)); break;
    }
  }
  return acc;
}

std::vector<Matrix> partition(const Matrix& a, std::size_t v) {
  require(v >= 1, "partition: v must be >= 1");
  require(a.rows() > 0 && a.cols() > 0, "partition: empty matrix");
  const std::size_t groups = ceil_div(a.cols(), v);
  std::vector<Matrix> out;
  out.reserve(groups);
  for (std::size_t k = 0; k < groups; ++k) {
    Matrix block(a.rows(), v);
    const std::size_t width = std::min(v, a.cols() - k * v);
    for (std::size_t m = 0; m < a.rows(); ++m)
      for (std::size_t i = 0; i < width; ++i) block(m, i) = a(m, k * v + i);
    out.push_back(std::move(block));
  }
  return out;
}

Matrix pad_rows(const Matrix& b, std::size_t v) {
  require(v >= 1, "pad_rows: v must be >= 1");
  const std::size_t padded = ceil_div(b.rows(), v) * v;
  if (padded == b.rows()) return b;
  Matrix out(padded, b.cols());
  std::copy(b.data().begin(), b.data().end(), out.data().begin());
  return out;
}

void Codebook::validate() const {
  require(v >= 1 && K >= 1, "codebook: v and K must be >= 1");
  require(centroids.size() == ceil_div(K, v), "codebook: subspace count must equal ceil(K/v)");
  const std::size_t count = c();
  require(count >= 1, "codebook: no centroids");
  for (const Matrix& z : centroids) {
    require(z.rows() == count && z.cols() == v, "codebook: every subspace must hold c x v centroids");
    require(all_finite(z), "codebook: centroids must be finite");
  }
}

Codebook random_codebook(std::size_t K, std::size_t v, std::size_t c, std::uint64_t seed,
                         double stddev) {
  require(K >= 1 && v >= 1 && c >= 1, "random_codebook: K, v, c must be >= 1");
  Codebook cb{K, v, {}};
  Rng rng(seed);
  for (std::size_t k = 0; k < ceil_div(K, v); ++k) {
    Matrix z(c, v);
    for (double& x : z.data()) x = rng.normal(0.0, stddev);
    // padded coordinates of the last subspace are always zero in the data
    for (std::size_t i = 0; i < v; ++i)
      if (k * v + i >= K)
        for (std::size_t j = 0; j < c; ++j) z(j, i) = 0.0;
    cb.centroids.push_back(std::move(z));
  }
  return cb;
}

std::uint64_t PSumTable::size_bits(unsigned bit_lut) const {
  return static_cast<std::uint64_t>(n_) * c_ * subspaces_ * bit_lut;
}

PSumTable PSumTable::from_fp32(std::size_t subspaces, std::size_t c, std::size_t n,
                               std::size_t tile_n, std::vector<float> values) {
  require(values.size() == subspaces * c * n, "PSum table: FP32 payload size mismatch");
  require(tile_n >= 1 && tile_n <= n, "PSum table: tile width must be in [1, N]");
  PSumTable t;
  t.subspaces_ = subspaces;
  t.c_ = c;
  t.n_ = n;
  t.tile_n_ = tile_n;
  t.precision_ = LutPrecision::FP32;
  t.values_.assign(values.begin(), values.end());
  return t;
}

PSumTable PSumTable::from_int8(std::size_t subspaces, std::size_t c, std::size_t n,
                               std::size_t tile_n, std::vector<std::int8_t> codes,
                               std::vector<double> scales) {
  require(codes.size() == subspaces * c * n, "PSum table: INT8 payload size mismatch");
  require(tile_n >= 1 && tile_n <= n, "PSum table: tile width must be in [1, N]");
  const std::size_t tiles = ceil_div(n, tile_n);
  require(scales.size() == subspaces * tiles, "PSum table: scale count mismatch");
  PSumTable t;
  t.subspaces_ = subspaces;
  t.c_ = c;
  t.n_ = n;
  t.tile_n_ = tile_n;
  t.precision_ = LutPrecision::INT8;
  t.values_.resize(codes.size());
  for (std::size_t k = 0; k < subspaces; ++k)
    for (std::size_t j = 0; j < c; ++j)
      for (std::size_t col = 0; col < n; ++col) {
        const std::size_t i = (k * c + j) * n + col;
        t.values_[i] = static_cast<double>(codes[i]) * scales[k * tiles + col / tile_n];
      }
  t.codes_ = std::move(codes);
  t.scales_ = std::move(scales);
  return t;
}

Codebook fit_codebook(const Matrix& a, const VQConfig& cfg, std::uint64_t seed,
                      std::size_t max_iterations) {
  cfg.validate();
  require(all_finite(a), "fit_codebook: input contains non-finite values");
  Codebook cb{a.cols(), cfg.v, {}};
  const auto blocks = partition(a, cfg.v);
  cb.centroids.reserve(blocks.size());
  for (std::size_t k = 0; k < blocks.size(); ++k)
    cb.centroids.push_back(
        kmeans_fit(blocks[k], cfg.c, cfg.metric, mix_seed(seed, k), max_iterations).centroids);
  return cb;
}

std::pair<std::uint32_t, double> nearest_centroid(std::span<const double> x, const Matrix& centroids,
                                                  Metric metric, DistPrecision precision) {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.rows(); ++j) {
    const double d = distance(x, centroids.row(j), metric, precision);
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::uint32_t>(j);
    }
  }
  return {best, best_d};
}

void encode_row(std::span<const double> row, const Codebook& codebook, Metric metric,
                DistPrecision precision, std::span<std::uint32_t> out) {
  require(row.size() == codebook.K, "encode: input width does not match codebook K");
  require(out.size() == codebook.num_subspaces(), "encode: index buffer has wrong length");
  const std::size_t v = codebook.v;
  std::vector<double> sub(v);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::fill(sub.begin(), sub.end(), 0.0);
    const std::size_t width = std::min(v, row.size() - k * v);
    std::copy_n(row.begin() + static_cast<std::ptrdiff_t>(k * v), width, sub.begin());
    out[k] = nearest_centroid(sub, codebook.centroids[k], metric, precision).first;
  }
}

EncodedMatrix encode(const Matrix& a, const Codebook& codebook, Metric metric,
                     DistPrecision precision) {
  require(!a.empty(), "encode: empty input");
  require(a.cols() == codebook.K, "encode: input width does not match codebook K");
  require(codebook.num_subspaces() == ceil_div(codebook.K, codebook.v),
          "encode: codebook subspace count inconsistent with K and v");
  const std::size_t groups = codebook.num_subspaces();
  EncodedMatrix out{a.rows(), groups, codebook.c(), {}};
  out.indices.resize(a.rows() * groups);
  for (std::size_t m = 0; m < a.rows(); ++m)
    encode_row(a.row(m), codebook, metric, precision,
               std::span(out.indices).subspan(m * groups, groups));
  return out;
}

Matrix decode(const EncodedMatrix& encoded, const Codebook& codebook) {
  require(encoded.subspaces == codebook.num_subspaces(), "decode: subspace count mismatch");
  const std::size_t v = codebook.v;
  Matrix out(encoded.rows, codebook.K);
  for (std::size_t m = 0; m < encoded.rows; ++m)
    for (std::size_t k = 0; k < encoded.subspaces; ++k) {
      const std::uint32_t idx = encoded.at(m, k);
      if (idx >= codebook.c()) fail(ErrorKind::Corruption, "decode: centroid index out of range");
      auto z = codebook.centroid(k, idx);
      const std::size_t width = std::min(v, codebook.K - k * v);
      for (std::size_t i = 0; i < width; ++i) out(m, k * v + i) = z[i];
    }
  return out;
}

PSumTable build_lut(const Codebook& codebook, const Matrix& b, LutPrecision precision,
                    std::size_t tile_n) {
  const std::size_t v = codebook.v;
  const std::size_t groups = codebook.num_subspaces();
  require(b.rows() == codebook.K || b.rows() == groups * v,
          "build_lut: weight rows must equal K (or K padded to a multiple of v)");
  require(b.cols() >= 1, "build_lut: weight matrix has no columns");
  const Matrix bp = pad_rows(b, v);
  const std::size_t n = b.cols();
  const std::size_t c = codebook.c();
  if (tile_n == 0) tile_n = n;

  std::vector<double> exact(groups * c * n, 0.0);
  for (std::size_t k = 0; k < groups; ++k)
    for (std::size_t j = 0; j < c; ++j) {
      auto z = codebook.centroid(k, j);
      double* dst = exact.data() + (k * c + j) * n;
      for (std::size_t i = 0; i < v; ++i) {
        const double zi = z[i];
        auto brow = bp.row(k * v + i);
        for (std::size_t col = 0; col < n; ++col) dst[col] += zi * brow[col];
      }
    }

  if (precision == LutPrecision::FP32) {
    std::vector<float> values(exact.size());
    std::transform(exact.begin(), exact.end(), values.begin(),
                   [](double x) { return static_cast<float>(x); });
    return PSumTable::from_fp32(groups, c, n, tile_n, std::move(values));
  }

  const std::size_t tiles = ceil_div(n, tile_n);
  std::vector<double> scales(groups * tiles, 1.0);
  std::vector<std::int8_t> codes(exact.size());
  for (std::size_t k = 0; k < groups; ++k)
    for (std::size_t t = 0; t < tiles; ++t) {
      const std::size_t lo = t * tile_n;
      const std::size_t hi = std::min(n, lo + tile_n);
      double peak = 0.0;
      for (std::size_t j = 0; j < c; ++j)
        for (std::size_t col = lo; col < hi; ++col)
          peak = std::max(peak, std::abs(exact[(k * c + j) * n + col]));
      const double scale = peak > 0.0 ? peak / 127.0 : 1.0;
      scales[k * tiles + t] = scale;
      for (std::size_t j = 0; j < c; ++j)
        for (std::size_t col = lo; col < hi; ++col) {
          const std::size_t i = (k * c + j) * n + col;
          // nearbyint honours the default round-to-nearest-even mode
          const double q = std::clamp(std::nearbyint(exact[i] / scale), -127.0, 127.0);
          codes[i] = static_cast<std::int8_t>(q);
        }
    }
  return PSumTable::from_int8(groups, c, n, tile_n, std::move(codes), std::move(scales));
}

Matrix lut_gemm(const EncodedMatrix& encoded, const PSumTable& table) {
  require(encoded.subspaces == table.num_subspaces(), "lut_gemm: subspace count mismatch");
  const std::size_t n = table.cols();
  const std::size_t c = table.centroids();
  Matrix out(encoded.rows, n);
  for (std::size_t m = 0; m < encoded.rows; ++m) {
    auto dst = out.row(m);
    for (std::size_t k = 0; k < encoded.subspaces; ++k) {
      const std::uint32_t idx = encoded.at(m, k);
      if (idx >= c)
        fail(ErrorKind::Corruption, "lut_gemm: index " + std::to_string(idx) + " at (" +
                                        std::to_string(m) + "," + std::to_string(k) +
                                        ") exceeds centroid count " + std::to_string(c));
      auto src = table.entries(k, idx);
      for (std::size_t col = 0; col < n; ++col) dst[col] += src[col];
    }
  }
  return out;
}

Matrix exact_gemm(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "exact_gemm: inner dimensions disagree");
  return matmul(a, b);
}

AmmError compare_products(const Matrix& approx, const Matrix& exact) {
  require(approx.rows() == exact.rows() && approx.cols() == exact.cols(),
          "compare_products: shape mismatch");
  AmmError err;
  double diff2 = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const double d = approx.data()[i] - exact.data()[i];
    diff2 += d * d;
    err.max_abs = std::max(err.max_abs, std::abs(d));
  }
  err.frobenius_abs = std::sqrt(diff2);
  const double norm = frobenius_norm(exact);
  if (norm == 0.0) {
    err.zero_norm = true;
    err.frobenius_rel = std::numeric_limits<double>::quiet_NaN();
  } else {
    err.frobenius_rel = err.frobenius_abs / norm;
  }
  return err;
}

AmmError amm_error(const Matrix& a, const Matrix& b, const VQConfig& cfg, const Codebook& codebook) {
  cfg.validate();
  const EncodedMatrix enc = encode(a, codebook, cfg.metric, cfg.dist_precision);
  const PSumTable table = build_lut(codebook, b, cfg.lut_precision);
  return compare_products(lut_gemm(enc, table), exact_gemm(a, b));
}

}  // namespace lutdla
