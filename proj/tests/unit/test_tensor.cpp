#include <gtest/gtest.h>

#include "lutdla/tensor.hpp"
#include "lutdla/vq.hpp"
#include "oracles.hpp"

namespace lutdla {
namespace {

// Direct convolution; weights [out_ch][in_ch][ky][kx].
Tensor4 direct_conv(const Tensor4& x, const std::vector<double>& w, std::size_t out_ch, const ConvGeometry& g) {
  const std::size_t oh = g.out_h(x.h), ow = g.out_w(x.w);
  Tensor4 y(x.n, out_ch, oh, ow);
  for (std::size_t b = 0; b < x.n; ++b)
    for (std::size_t o = 0; o < out_ch; ++o)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          for (std::size_t ci = 0; ci < x.c; ++ci)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(x.h) || ix >= static_cast<long>(x.w)) continue;
                acc += x.at(b, ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) *
                       w[((o * x.c + ci) * g.kernel_h + ky) * g.kernel_w + kx];
              }
          y.at(b, o, oy, ox) = acc;
        }
  return y;
}

TEST(Im2col, GemmLoweringMatchesDirectConvolution) {
  Rng rng(1);
  for (const ConvGeometry g : {ConvGeometry{3, 3, 1, 0}, ConvGeometry{3, 3, 2, 1}, ConvGeometry{1, 1, 1, 0},
                               ConvGeometry{2, 3, 1, 2}}) {
    Tensor4 x(2, 3, 6, 5);
    for (double& v : x.data) v = rng.normal();
    const std::size_t out_ch = 4;
    std::vector<double> w(out_ch * 3 * g.kernel_h * g.kernel_w);
    for (double& v : w) v = rng.normal();

    Matrix wmat(3 * g.kernel_h * g.kernel_w, out_ch);
    for (std::size_t o = 0; o < out_ch; ++o)
      for (std::size_t r = 0; r < wmat.rows(); ++r) wmat(r, o) = w[o * wmat.rows() + r];

    const Matrix cols = im2col(x, g);
    ASSERT_EQ(cols.rows(), 2 * g.out_h(6) * g.out_w(5));
    const Tensor4 y = gemm_to_nchw(exact_gemm(cols, wmat), 2, g.out_h(6), g.out_w(5));
    const Tensor4 ref = direct_conv(x, w, out_ch, g);
    ASSERT_EQ(y.data.size(), ref.data.size());
    for (std::size_t i = 0; i < y.data.size(); ++i) EXPECT_NEAR(y.data[i], ref.data[i], 1e-12);
  }
}

}  // namespace
}  // namespace lutdla
