#include "lutdla/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lutdla {

void ByteWriter::u16(std::uint16_t x) {
  for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(x >> (8 * i)));
}
void ByteWriter::u32(std::uint32_t x) {
  for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(x >> (8 * i)));
}
void ByteWriter::u64(std::uint64_t x) {
  for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(x >> (8 * i)));
}
void ByteWriter::f32(float x) { u32(std::bit_cast<std::uint32_t>(x)); }
void ByteWriter::f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }

void ByteWriter::header(ContainerKind kind, std::span<const std::uint64_t> dims) {
  for (char ch : kContainerMagic) u8(static_cast<std::uint8_t>(ch));
  u16(kContainerVersion);
  u16(static_cast<std::uint16_t>(kind));
  u32(static_cast<std::uint32_t>(dims.size()));
  for (std::uint64_t d : dims) u64(d);
}

void ByteReader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) fail(ErrorKind::Corruption, "container truncated");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return data_[pos_++];
}
std::uint16_t ByteReader::u16() {
  need(2);
  std::uint16_t x = 0;
  for (int i = 0; i < 2; ++i) x |= static_cast<std::uint16_t>(data_[pos_++]) << (8 * i);
  return x;
}
std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
  return x;
}
std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
  return x;
}
float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  need(n);
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::vector<std::uint64_t> ByteReader::header(ContainerKind expected) {
  need(12);
  for (char ch : kContainerMagic)
    if (u8() != static_cast<std::uint8_t>(ch)) fail(ErrorKind::Corruption, "not a LUTD container (bad magic)");
  const std::uint16_t version = u16();
  if (version != kContainerVersion)
    fail(ErrorKind::Corruption, "unsupported container version " + std::to_string(version));
  const std::uint16_t kind = u16();
  if (kind != static_cast<std::uint16_t>(expected))
    fail(ErrorKind::Corruption, "container holds kind " + std::to_string(kind) + ", expected " +
                                      std::to_string(static_cast<int>(expected)));
  const std::uint32_t ndims = u32();
  if (ndims > 16) fail(ErrorKind::Corruption, "container shape header too long");
  std::vector<std::uint64_t> dims(ndims);
  for (auto& d : dims) d = u64();
  return dims;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::InvalidInput, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::InvalidInput, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_matrix(ByteWriter& w, const Matrix& m) {
  const std::uint64_t dims[] = {m.rows(), m.cols()};
  w.header(ContainerKind::Matrix, dims);
  for (double x : m.data()) w.f64(x);
}

namespace {
std::uint64_t element_count(std::initializer_list<std::uint64_t> dims) {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims)
    if (__builtin_mul_overflow(n, d, &n)) fail(ErrorKind::Corruption, "container shape overflows");
  return n;
}
}  // namespace

Matrix read_matrix(ByteReader& r) {
  const auto dims = r.header(ContainerKind::Matrix);
  if (dims.size() != 2) fail(ErrorKind::Corruption, "matrix container needs 2 dims");
  if (r.remaining() / 8 < element_count({dims[0], dims[1]})) fail(ErrorKind::Corruption, "matrix payload truncated");
  Matrix m(dims[0], dims[1]);
  for (double& x : m.data()) x = r.f64();
  return m;
}

void write_codebook(ByteWriter& w, const Codebook& cb) {
  const std::uint64_t dims[] = {cb.K, cb.v, cb.c(), cb.num_subspaces()};
  w.header(ContainerKind::Codebook, dims);
  for (const Matrix& z : cb.centroids)
    for (double x : z.data()) w.f64(x);
}

Codebook read_codebook(ByteReader& r) {
  const auto dims = r.header(ContainerKind::Codebook);
  if (dims.size() != 4) fail(ErrorKind::Corruption, "codebook container needs 4 dims");
  Codebook cb{dims[0], dims[1], {}};
  const std::uint64_t c = dims[2];
  const std::uint64_t groups = dims[3];
  if (r.remaining() / 8 < element_count({groups, c, cb.v})) fail(ErrorKind::Corruption, "codebook payload truncated");
  for (std::uint64_t k = 0; k < groups; ++k) {
    Matrix z(c, cb.v);
    for (double& x : z.data()) x = r.f64();
    cb.centroids.push_back(std::move(z));
  }
  cb.validate();
  return cb;
}

void write_psum_table(ByteWriter& w, const PSumTable& t) {
  const std::uint64_t prec = t.precision() == LutPrecision::FP32 ? 0 : 1;
  const std::uint64_t dims[] = {t.num_subspaces(), t.centroids(), t.cols(), t.tile_n(), prec};
  w.header(ContainerKind::PSumTable, dims);
  if (prec == 0) {
    for (std::size_t k = 0; k < t.num_subspaces(); ++k)
      for (std::size_t j = 0; j < t.centroids(); ++j)
        for (double x : t.entries(k, j)) w.f32(static_cast<float>(x));
  } else {
    for (double s : t.scales()) w.f64(s);
    for (std::int8_t q : t.codes()) w.i8(q);
  }
}

PSumTable read_psum_table(ByteReader& r) {
  const auto dims = r.header(ContainerKind::PSumTable);
  if (dims.size() != 5) fail(ErrorKind::Corruption, "PSum table container needs 5 dims");
  const std::size_t groups = dims[0], c = dims[1], n = dims[2], tile = dims[3];
  if (tile == 0 || n == 0) fail(ErrorKind::Corruption, "PSum table container: bad tile/N");
  const std::size_t count = element_count({groups, c, n});
  if (dims[4] == 0) {
    if (r.remaining() / 4 < count) fail(ErrorKind::Corruption, "PSum table payload truncated");
    std::vector<float> values(count);
    for (float& x : values) x = r.f32();
    return PSumTable::from_fp32(groups, c, n, tile, std::move(values));
  }
  if (dims[4] != 1) fail(ErrorKind::Corruption, "PSum table container: unknown precision tag");
  if (r.remaining() / 8 < element_count({groups, ceil_div(n, tile)}))
    fail(ErrorKind::Corruption, "PSum table payload truncated");
  std::vector<double> scales(groups * ceil_div(n, tile));
  if (r.remaining() / 8 < scales.size() || r.remaining() - scales.size() * 8 < count) fail(ErrorKind::Corruption, "PSum table payload truncated");
  for (double& s : scales) s = r.f64();
  std::vector<std::int8_t> codes(count);
  for (auto& q : codes) q = r.i8();
  return PSumTable::from_int8(groups, c, n, tile, std::move(codes), std::move(scales));
}

namespace {
template <typename T, typename WriteFn>
void save_with(const std::filesystem::path& path, const T& value, WriteFn fn) {
  ByteWriter w;
  fn(w, value);
  write_file_bytes(path, w.bytes());
}
}  // namespace

void save_matrix_bin(const std::filesystem::path& path, const Matrix& m) { save_with(path, m, write_matrix); }
Matrix load_matrix_bin(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  return read_matrix(r);
}
void save_codebook_bin(const std::filesystem::path& path, const Codebook& cb) { save_with(path, cb, write_codebook); }
Codebook load_codebook_bin(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  return read_codebook(r);
}
void save_psum_table_bin(const std::filesystem::path& path, const PSumTable& t) {
  save_with(path, t, write_psum_table);
}
PSumTable load_psum_table_bin(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  return read_psum_table(r);
}

Matrix parse_matrix_csv(std::istream& in) {
  std::vector<double> data;
  std::size_t cols = 0, rows = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::size_t count = 0;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double x = std::stod(cell, &used);
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
        data.push_back(x);
      } catch (const std::exception&) {
        fail(ErrorKind::InvalidInput, "CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
      ++count;
    }
    if (rows == 0) cols = count;
    if (count != cols)
      fail(ErrorKind::InvalidInput, "CSV line " + std::to_string(lineno) + ": ragged row");
    ++rows;
  }
  if (rows == 0 || cols == 0) fail(ErrorKind::InvalidInput, "CSV holds no data");
  return Matrix(rows, cols, std::move(data));
}

Matrix load_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidInput, "cannot open " + path.string());
  return parse_matrix_csv(in);
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  std::ostringstream buf;
  buf.precision(17);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) buf << ',';
      buf << m(r, c);
    }
    buf << '\n';
  }
  out << buf.str();
}

void save_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::InvalidInput, "cannot write " + path.string());
  write_matrix_csv(out, m);
}

Matrix load_matrix(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kContainerMagic, 4) == 0) {
    ByteReader r(bytes);
    return read_matrix(r);
  }
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  return parse_matrix_csv(in);
}

void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  if (path.extension() == ".csv")
    save_matrix_csv(path, m);
  else
    save_matrix_bin(path, m);
}

nlohmann::json to_json(const Codebook& cb) {
  nlohmann::json j;
  j["K"] = cb.K;
  j["v"] = cb.v;
  j["c"] = cb.c();
  auto& subspaces = j["centroids"] = nlohmann::json::array();
  for (const Matrix& z : cb.centroids) {
    auto rows = nlohmann::json::array();
    for (std::size_t r = 0; r < z.rows(); ++r)
      rows.push_back(std::vector<double>(z.row(r).begin(), z.row(r).end()));
    subspaces.push_back(std::move(rows));
  }
  return j;
}

Codebook codebook_from_json(const nlohmann::json& j) {
  try {
    Codebook cb{j.at("K").get<std::size_t>(), j.at("v").get<std::size_t>(), {}};
    const auto c = j.at("c").get<std::size_t>();
    for (const auto& sub : j.at("centroids")) {
      Matrix z(c, cb.v);
      require(sub.size() == c, "codebook JSON: wrong centroid count");
      for (std::size_t r = 0; r < c; ++r) {
        const auto row = sub.at(r).get<std::vector<double>>();
        require(row.size() == cb.v, "codebook JSON: centroid length differs from v");
        std::copy(row.begin(), row.end(), z.row(r).begin());
      }
      cb.centroids.push_back(std::move(z));
    }
    cb.validate();
    return cb;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, std::string("codebook JSON: ") + e.what());
  }
}

nlohmann::json to_json(const PSumTable& t) {
  nlohmann::json j;
  j["subspaces"] = t.num_subspaces();
  j["c"] = t.centroids();
  j["N"] = t.cols();
  j["tile_n"] = t.tile_n();
  j["precision"] = std::string(to_string(t.precision()));
  if (t.precision() == LutPrecision::FP32) {
    std::vector<float> values;
    for (std::size_t k = 0; k < t.num_subspaces(); ++k)
      for (std::size_t c = 0; c < t.centroids(); ++c)
        for (double x : t.entries(k, c)) values.push_back(static_cast<float>(x));
    j["values"] = values;
  } else {
    j["scales"] = t.scales();
    j["codes"] = t.codes();
  }
  return j;
}

PSumTable psum_table_from_json(const nlohmann::json& j) {
  try {
    const auto groups = j.at("subspaces").get<std::size_t>();
    const auto c = j.at("c").get<std::size_t>();
    const auto n = j.at("N").get<std::size_t>();
    const auto tile = j.at("tile_n").get<std::size_t>();
    if (parse_lut_precision(j.at("precision").get<std::string>()) == LutPrecision::FP32)
      return PSumTable::from_fp32(groups, c, n, tile, j.at("values").get<std::vector<float>>());
    return PSumTable::from_int8(groups, c, n, tile, j.at("codes").get<std::vector<std::int8_t>>(),
                                j.at("scales").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, std::string("PSum table JSON: ") + e.what());
  }
}

}  // namespace lutdla
