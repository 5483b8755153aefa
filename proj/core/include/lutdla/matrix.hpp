#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lutdla/error.hpp"

namespace lutdla {

/// Dense row-major matrix of doubles. The only matrix type in the library;
/// reduced-precision paths round values on the way in and out rather than
/// changing storage.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, "matrix data size does not match shape");
  }

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  Matrix transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// C = A * B, i-k-j loop order, accumulation in double.
Matrix matmul(const Matrix& a, const Matrix& b);
/// C = A^T * B without materialising the transpose.
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
/// C = A * B^T without materialising the transpose.
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
bool all_finite(const Matrix& a);

}  // namespace lutdla
