#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lutdla/matrix.hpp"
#include "lutdla/vq.hpp"

namespace lutdla {

// Binary container layout (all integers and floats little-endian):
//
//   offset  size  field
//   0       4     magic "LUTD"
//   4       2     format version (currently 1)
//   6       2     payload kind (ContainerKind)
//   8       4     number of shape dimensions D
//   12      8*D   shape dimensions (u64)
//   12+8D   ...   kind-specific payload
//
// Matrix      dims [rows, cols]                payload rows*cols f64, row-major
// Codebook    dims [K, v, c, N_c]              payload N_c*c*v f64, [k][j][i]
// PSumTable   dims [N_c, c, N, tile_n, prec]   prec 0 = FP32: N_c*c*N f32, [k][j][n]
//                                              prec 1 = INT8: N_c*N_o f64 scales
//                                              then N_c*c*N i8 codes
// Checkpoint  dims [layers]                    see nn.hpp

inline constexpr char kContainerMagic[4] = {'L', 'U', 'T', 'D'};
inline constexpr std::uint16_t kContainerVersion = 1;

enum class ContainerKind : std::uint16_t {
  Matrix = 1,
  Codebook = 2,
  PSumTable = 3,
  Checkpoint = 4,
};

class ByteWriter {
 public:
  void u8(std::uint8_t x) { bytes_.push_back(x); }
  void u16(std::uint16_t x);
  void u32(std::uint32_t x);
  void u64(std::uint64_t x);
  void i8(std::int8_t x) { u8(static_cast<std::uint8_t>(x)); }
  void f32(float x);
  void f64(double x);
  void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }

  void header(ContainerKind kind, std::span<const std::uint64_t> dims);

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int8_t i8() { return static_cast<std::int8_t>(u8()); }
  float f32();
  double f64();
  std::span<const std::uint8_t> raw(std::size_t n);

  /// Validates magic, version and kind; returns the shape dimensions.
  std::vector<std::uint64_t> header(ContainerKind expected);

  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

void write_matrix(ByteWriter& w, const Matrix& m);
Matrix read_matrix(ByteReader& r);
void write_codebook(ByteWriter& w, const Codebook& cb);
Codebook read_codebook(ByteReader& r);
void write_psum_table(ByteWriter& w, const PSumTable& t);
PSumTable read_psum_table(ByteReader& r);

void save_matrix_bin(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix_bin(const std::filesystem::path& path);
void save_codebook_bin(const std::filesystem::path& path, const Codebook& cb);
Codebook load_codebook_bin(const std::filesystem::path& path);
void save_psum_table_bin(const std::filesystem::path& path, const PSumTable& t);
PSumTable load_psum_table_bin(const std::filesystem::path& path);

/// Plain numeric CSV; lines starting with '#' and blank lines are skipped.
Matrix parse_matrix_csv(std::istream& in);
Matrix load_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(std::ostream& out, const Matrix& m);
void save_matrix_csv(const std::filesystem::path& path, const Matrix& m);

/// Dispatches on the file's leading bytes: container magic or CSV text.
Matrix load_matrix(const std::filesystem::path& path);
/// ".csv" writes CSV, anything else the binary container.
void save_matrix(const std::filesystem::path& path, const Matrix& m);

nlohmann::json to_json(const Codebook& cb);
Codebook codebook_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PSumTable& t);
PSumTable psum_table_from_json(const nlohmann::json& j);

}  // namespace lutdla
