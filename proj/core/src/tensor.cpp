#include "lutdla/tensor.hpp"

namespace lutdla {

Matrix im2col(const Tensor4& x, const ConvGeometry& g) {
  require(x.n > 0 && x.c > 0 && x.h > 0 && x.w > 0, "im2col: empty tensor");
  require(g.stride >= 1, "im2col: stride must be >= 1");
  require(x.h + 2 * g.pad >= g.kernel_h && x.w + 2 * g.pad >= g.kernel_w,
          "im2col: kernel larger than padded input");
  const std::size_t oh = g.out_h(x.h), ow = g.out_w(x.w);
  Matrix out(x.n * oh * ow, x.c * g.kernel_h * g.kernel_w);
  for (std::size_t b = 0; b < x.n; ++b)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        auto row = out.row((b * oh + oy) * ow + ox);
        std::size_t col = 0;
        for (std::size_t ch = 0; ch < x.c; ++ch)
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx, ++col) {
              const auto y = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
              const auto xx = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
              if (y < 0 || xx < 0 || y >= static_cast<std::ptrdiff_t>(x.h) || xx >= static_cast<std::ptrdiff_t>(x.w))
                continue;
              row[col] = x.at(b, ch, static_cast<std::size_t>(y), static_cast<std::size_t>(xx));
            }
      }
  return out;
}

Tensor4 gemm_to_nchw(const Matrix& y, std::size_t batch, std::size_t out_h, std::size_t out_w) {
  require(y.rows() == batch * out_h * out_w, "gemm_to_nchw: row count does not match geometry");
  Tensor4 t(batch, y.cols(), out_h, out_w);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t oy = 0; oy < out_h; ++oy)
      for (std::size_t ox = 0; ox < out_w; ++ox)
        for (std::size_t ch = 0; ch < y.cols(); ++ch)
          t.at(b, ch, oy, ox) = y((b * out_h + oy) * out_w + ox, ch);
  return t;
}

}  // namespace lutdla
