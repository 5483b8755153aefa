#pragma once

#include <cstddef>
#include <vector>

#include "lutdla/matrix.hpp"

namespace lutdla {

/// NCHW activation tensor. Only used to lower small convolutions onto GEMM.
struct Tensor4 {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_)
      : n(n_), c(c_), h(h_), w(w_), data(n_ * c_ * h_ * w_, 0.0) {}

  double& at(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) {
    return data[((b * c + ch) * h + y) * w + x];
  }
  double at(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) const {
    return data[((b * c + ch) * h + y) * w + x];
  }
};

struct ConvGeometry {
  std::size_t kernel_h = 3, kernel_w = 3, stride = 1, pad = 0;

  std::size_t out_h(std::size_t h) const { return (h + 2 * pad - kernel_h) / stride + 1; }
  std::size_t out_w(std::size_t w) const { return (w + 2 * pad - kernel_w) / stride + 1; }
};

/// Rows are (batch, out_y, out_x), columns (channel, ky, kx); padding reads zero.
Matrix im2col(const Tensor4& x, const ConvGeometry& g);

/// Reshapes a GEMM result with rows (batch, out_y, out_x) and one column per
/// output channel back to NCHW.
Tensor4 gemm_to_nchw(const Matrix& y, std::size_t batch, std::size_t out_h, std::size_t out_w);

}  // namespace lutdla
