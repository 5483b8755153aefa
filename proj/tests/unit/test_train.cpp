#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "lutdla/nn.hpp"
#include "lutdla/tensor.hpp"
#include "lutdla/toy_data.hpp"
#include "lutdla/train.hpp"
#include "oracles.hpp"

namespace lutdla {
namespace {

using testing::finite_difference;
using testing::gradients_match;
using testing::random_matrix;

Dense random_dense(std::size_t k, std::size_t n, Rng& rng) {
  Dense d{random_matrix(k, n, rng, 0.7), std::vector<double>(n)};
  for (double& b : d.bias) b = rng.normal(0.0, 0.1);
  return d;
}

LutLinear random_lut(std::size_t k, std::size_t n, std::size_t v, std::size_t c, Rng& rng) {
  LutLinear l{random_codebook(k, v, c, rng.next()), random_matrix(k, n, rng, 0.7), std::vector<double>(n), {}};
  l.vq.v = v;
  l.vq.c = c;
  for (double& b : l.bias) b = rng.normal(0.0, 0.1);
  return l;
}

Dataset labelled(std::size_t rows, std::size_t cols, std::size_t classes, Rng& rng) {
  Dataset d;
  d.x = random_matrix(rows, cols, rng);
  for (std::size_t i = 0; i < rows; ++i) d.labels.push_back(rng.below(classes));
  return d;
}

// Softmax cross-entropy, written out independently of the library.
double ce(const Matrix& out, const std::vector<std::size_t>& labels) {
  double total = 0.0;
  for (std::size_t m = 0; m < out.rows(); ++m) {
    double z = 0.0;
    for (double x : out.row(m)) z += std::exp(x);
    total += std::log(z) - out(m, labels[m]);
  }
  return total / static_cast<double>(out.rows());
}

Matrix add_bias(Matrix y, const std::vector<double>& b) {
  for (std::size_t m = 0; m < y.rows(); ++m)
    for (std::size_t n = 0; n < y.cols(); ++n) y(m, n) += b[n];
  return y;
}

Matrix tanh_of(Matrix y) {
  for (double& x : y.data()) x = std::tanh(x);
  return y;
}

double sq_dist(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
  return s;
}

double checksum(const TinyNet& net) {
  double s = 0.0;
  for (const Layer& l : net.layers) {
    if (const auto* d = std::get_if<Dense>(&l)) {
      for (double x : d->W.data()) s += x;
      for (double x : d->bias) s += x;
    } else if (const auto* u = std::get_if<LutLinear>(&l)) {
      for (double x : u->W.data()) s += x;
      for (double x : u->bias) s += x;
    }
  }
  return s;
}

TEST(Substitute, ShapeArithmetic) {
  Rng rng(1);
  TinyNet net;
  net.layers.emplace_back(random_dense(8, 4, rng));
  const TinyNet lut = substitute(net, VQConfig{2, 4}, random_matrix(64, 8, rng), 7);
  const auto& l = std::get<LutLinear>(lut.layers[0]);
  ASSERT_EQ(l.codebook.num_subspaces(), 4u);
  for (const Matrix& z : l.codebook.centroids) {
    EXPECT_EQ(z.rows(), 4u);
    EXPECT_EQ(z.cols(), 2u);
  }
  EXPECT_EQ(l.W, std::get<Dense>(net.layers[0]).W);
}

TEST(Substitute, LosslessCalibrationKeepsForward) {
  Rng rng(2);
  TinyNet net;
  net.layers.emplace_back(random_dense(6, 5, rng));
  net.layers.emplace_back(Activation{ActivationKind::Tanh});
  net.layers.emplace_back(random_dense(5, 3, rng));
  // first-layer inputs take at most 3 distinct values per 2-wide subspace
  Matrix x(40, 6);
  const double palette[3][2] = {{0.5, -1.0}, {2.0, 0.25}, {-1.5, 1.5}};
  for (std::size_t m = 0; m < x.rows(); ++m)
    for (std::size_t k = 0; k < 3; ++k) {
      const auto p = rng.below(3);
      x(m, 2 * k) = palette[p][0];
      x(m, 2 * k + 1) = palette[p][1];
    }
  TinyNet lut = substitute(net, VQConfig{2, 3}, x, 3);
  // the second layer's inputs are not on a small palette, keep it dense
  lut.layers[2] = net.layers[2];
  EXPECT_LE(testing::max_rel_diff(forward(lut, x), forward(net, x)), 1e-5);
}

TEST(Substitute, ConvAsGemmCentroidCount) {
  Rng rng(3);
  Tensor4 img(2, 3, 6, 6);
  for (double& x : img.data) x = rng.normal();
  const ConvGeometry g{3, 3, 1, 1};
  const Matrix cols = im2col(img, g);  // 72 x 27
  TinyNet net;
  net.layers.emplace_back(random_dense(27, 8, rng));
  net.layers.emplace_back(Activation{ActivationKind::ReLU});
  net.layers.emplace_back(random_dense(8, 4, rng));  // 1x1 conv on the 8 feature maps
  const VQConfig vq{3, 4};
  const TinyNet lut = substitute(net, vq, cols, 5);
  const std::size_t expected = ceil_div(27, 3) * 4 * 3 + ceil_div(8, 3) * 4 * 3;
  EXPECT_EQ(lut.num_centroid_parameters(), expected);
}

TEST(Substitute, RejectsEmptyCalibration) {
  Rng rng(4);
  TinyNet net;
  net.layers.emplace_back(random_dense(4, 2, rng));
  EXPECT_THROW(substitute(net, VQConfig{2, 2}, Matrix(0, 4), 1), Error);
}

TEST(Forward, CodewordInputsMatchDense) {
  Rng rng(5);
  LutLinear l = random_lut(6, 4, 3, 5, rng);
  Matrix x(10, 6);
  for (std::size_t m = 0; m < 10; ++m)
    for (std::size_t k = 0; k < 2; ++k) {
      auto z = l.codebook.centroid(k, rng.below(5));
      std::copy(z.begin(), z.end(), x.row(m).begin() + static_cast<std::ptrdiff_t>(3 * k));
    }
  TinyNet lut_net;
  lut_net.layers.emplace_back(l);
  TinyNet dense_net;
  dense_net.layers.emplace_back(Dense{l.W, l.bias});
  EXPECT_LE(testing::max_rel_diff(forward(lut_net, x), forward(dense_net, x)), 1e-12);
  EXPECT_LE(testing::max_rel_diff(forward_lut(lut_net, x), forward(dense_net, x)), 1e-5);
}

TEST(Forward, SingleCentroidGivesIdenticalRows) {
  Rng rng(6);
  TinyNet net;
  net.layers.emplace_back(random_lut(4, 3, 2, 1, rng));
  const Matrix y = forward(net, random_matrix(7, 4, rng));
  for (std::size_t m = 1; m < y.rows(); ++m)
    for (std::size_t n = 0; n < y.cols(); ++n) EXPECT_EQ(y(m, n), y(0, n));
}

TEST(Forward, TwoMoonsLossReproducible) {
  const Dataset d = two_moons(100, 0.1, 11);
  TinyNet a = make_mlp({2, 8, 2}, ActivationKind::ReLU, LossKind::CrossEntropy, 3);
  TinyNet b = make_mlp({2, 8, 2}, ActivationKind::ReLU, LossKind::CrossEntropy, 3);
  const double la = task_loss(a, forward(a, d.x), d);
  EXPECT_TRUE(std::isfinite(la));
  EXPECT_EQ(la, task_loss(b, forward(b, d.x), d));
}

TEST(Forward, RejectsWrongWidth) {
  TinyNet net = make_mlp({3, 2}, ActivationKind::ReLU, LossKind::MSE, 1);
  EXPECT_THROW(forward(net, Matrix(2, 4)), Error);
}

TEST(TinyNet, ValidateCatchesShapeMismatch) {
  Rng rng(7);
  TinyNet net;
  net.layers.emplace_back(random_dense(3, 4, rng));
  net.layers.emplace_back(random_dense(5, 2, rng));
  EXPECT_THROW(net.validate(), Error);
  TinyNet bad_cb;
  LutLinear l = random_lut(4, 2, 2, 3, rng);
  l.vq.c = 4;
  bad_cb.layers.emplace_back(l);
  EXPECT_THROW(bad_cb.validate(), Error);
}

TEST(ReconstructionLoss, ScalarExample) {
  EXPECT_DOUBLE_EQ(reconstruction_loss(Matrix(1, 1, 1.0), Matrix(1, 1, 2.0), Matrix(1, 1, 3.0)), 18.0);
}

TEST(ReconstructionLoss, ZeroWhenExact) {
  Rng rng(8);
  const Matrix a = random_matrix(5, 4, rng);
  EXPECT_EQ(reconstruction_loss(a, a, random_matrix(4, 3, rng)), 0.0);
}

TEST(Backward, ZeroLambdaGivesZeroCentroidGradients) {
  Rng rng(9);
  TinyNet net;
  net.layers.emplace_back(random_lut(4, 3, 2, 3, rng));
  net.layers.emplace_back(Activation{ActivationKind::Tanh});
  net.layers.emplace_back(random_dense(3, 2, rng));
  const Gradients g = backward_ste(net, labelled(12, 4, 2, rng), 0.0);
  for (const Matrix& z : g.layers[0].dcentroids)
    for (double x : z.data()) EXPECT_EQ(x, 0.0);
}

TEST(Backward, CentroidGradientNonzeroIffReconstructionDiffers) {
  Rng rng(10);
  LutLinear l = random_lut(4, 3, 2, 3, rng);
  TinyNet net;
  net.layers.emplace_back(l);
  Dataset d = labelled(6, 4, 3, rng);
  auto norm = [&] {
    const Gradients g = backward_ste(net, d, 0.5);
    double s = 0.0;
    for (const Matrix& z : g.layers[0].dcentroids)
      for (double x : z.data()) s += std::abs(x);
    return s;
  };
  EXPECT_GT(norm(), 0.0);
  d.x = reconstruct(l, d.x);  // inputs on the codewords: Â = A
  EXPECT_EQ(norm(), 0.0);
}

// dW of a LUT layer: task loss through Â plus the stop-gradient L_re terms,
// checked by central differences with the stopped products frozen.
TEST(Backward, LutWeightGradientMatchesFiniteDifference) {
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    Rng rng(100 + trial);
    TinyNet net;
    net.layers.emplace_back(random_lut(4, 3, 2, 3, rng));
    net.layers.emplace_back(Activation{ActivationKind::Tanh});
    net.layers.emplace_back(random_dense(3, 2, rng));
    ASSERT_LE(net.num_parameters(), 64u);
    const Dataset d = labelled(8, 4, 2, rng);
    const double lambda = 0.3;
    const Gradients g = backward_ste(net, d, lambda);

    auto& lut = std::get<LutLinear>(net.layers[0]);
    const auto& dense = std::get<Dense>(net.layers[2]);
    const Matrix a_hat = reconstruct(lut, d.x);
    const Matrix sg_hat = matmul(a_hat, lut.W), sg_a = matmul(d.x, lut.W);
    auto f = [&] {
      const Matrix h = tanh_of(add_bias(matmul(a_hat, lut.W), lut.bias));
      const double task = ce(add_bias(matmul(h, dense.W), dense.bias), d.labels);
      const double re = sq_dist(sg_hat, matmul(d.x, lut.W)) + sq_dist(matmul(a_hat, lut.W), sg_a);
      return task + lambda * re / static_cast<double>(d.size());
    };
    const auto numeric = finite_difference(lut.W.data(), f);
    EXPECT_TRUE(gradients_match(g.layers[0].dW.data(), numeric, 1e-4)) << "trial " << trial;
    const auto nb = finite_difference(lut.bias, f);
    EXPECT_TRUE(gradients_match(g.layers[0].dbias, nb, 1e-4));
  }
}

TEST(Backward, LutWeightGradientEqualsDenseFedWithReconstruction) {
  Rng rng(11);
  TinyNet net;
  net.layers.emplace_back(random_lut(6, 3, 3, 4, rng));
  net.layers.emplace_back(Activation{ActivationKind::ReLU});
  net.layers.emplace_back(random_dense(3, 3, rng));
  Dataset d = labelled(10, 6, 3, rng);
  const Gradients g = backward_ste(net, d, 0.0);

  TinyNet dense = net;
  const auto& l = std::get<LutLinear>(net.layers[0]);
  dense.layers[0] = Dense{l.W, l.bias};
  Dataset dh = d;
  dh.x = reconstruct(l, d.x);
  const Gradients gd = backward_ste(dense, dh, 0.0);
  EXPECT_EQ(g.layers[0].dW, gd.layers[0].dW);
  EXPECT_EQ(g.layers[2].dW, gd.layers[2].dW);
}

// Upstream gradient: the STE surrogate replaces Â by A + SG(Â - A).
TEST(Backward, UpstreamGradientMatchesStraightThroughSurrogate) {
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    Rng rng(200 + trial);
    TinyNet net;
    net.layers.emplace_back(random_dense(2, 4, rng));
    net.layers.emplace_back(Activation{ActivationKind::Tanh});
    net.layers.emplace_back(random_lut(4, 3, 2, 3, rng));
    net.layers.emplace_back(Activation{ActivationKind::Tanh});
    net.layers.emplace_back(random_dense(3, 2, rng));
    ASSERT_LE(net.num_parameters(), 64u);
    const Dataset d = labelled(9, 2, 2, rng);
    const double lambda = 0.2;
    const Gradients g = backward_ste(net, d, lambda);

    auto& d0 = std::get<Dense>(net.layers[0]);
    const auto& lut = std::get<LutLinear>(net.layers[2]);
    const auto& d2 = std::get<Dense>(net.layers[4]);
    const Matrix a0 = tanh_of(add_bias(matmul(d.x, d0.W), d0.bias));
    const Matrix a_hat = reconstruct(lut, a0);
    const Matrix offset = [&] {
      Matrix o = matmul(a_hat, lut.W);
      const Matrix base = matmul(a0, lut.W);
      for (std::size_t i = 0; i < o.size(); ++i) o.data()[i] -= base.data()[i];
      return o;
    }();
    const Matrix sg_hat = matmul(a_hat, lut.W);
    auto f = [&] {
      const Matrix a = tanh_of(add_bias(matmul(d.x, d0.W), d0.bias));
      Matrix y = matmul(a, lut.W);
      for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += offset.data()[i];
      const Matrix h = tanh_of(add_bias(y, lut.bias));
      const double task = ce(add_bias(matmul(h, d2.W), d2.bias), d.labels);
      return task + lambda * sq_dist(sg_hat, matmul(a, lut.W)) / static_cast<double>(d.size());
    };
    EXPECT_TRUE(gradients_match(g.layers[0].dW.data(), finite_difference(d0.W.data(), f), 1e-4)) << trial;
    EXPECT_TRUE(gradients_match(g.layers[0].dbias, finite_difference(d0.bias, f), 1e-4)) << trial;
  }
}

// Centroids only see the second L_re term, ||Â(Z) W - SG(A W)||^2.
TEST(Backward, CentroidGradientMatchesFiniteDifference) {
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    Rng rng(300 + trial);
    TinyNet net;
    net.layers.emplace_back(random_lut(5, 3, 2, 3, rng));
    ASSERT_LE(net.num_parameters(), 64u);
    const Dataset d = labelled(10, 5, 3, rng);
    const double lambda = 0.7;
    const Gradients g = backward_ste(net, d, lambda);
    auto& lut = std::get<LutLinear>(net.layers[0]);
    const auto enc = encode(d.x, lut.codebook, lut.vq.metric, lut.vq.dist_precision);
    const Matrix sg_a = matmul(d.x, lut.W);
    for (std::size_t k = 0; k < lut.codebook.num_subspaces(); ++k) {
      auto f = [&] {
        return lambda * sq_dist(matmul(decode(enc, lut.codebook), lut.W), sg_a) / static_cast<double>(d.size());
      };
      const auto numeric = finite_difference(lut.codebook.centroids[k].data(), f);
      EXPECT_TRUE(gradients_match(g.layers[0].dcentroids[k].data(), numeric, 1e-4)) << trial << " " << k;
    }
  }
}

TEST(Backward, TanhAndMseGradients) {
  Rng rng(12);
  TinyNet net;
  net.loss = LossKind::MSE;
  net.layers.emplace_back(random_dense(3, 4, rng));
  net.layers.emplace_back(Activation{ActivationKind::Tanh});
  net.layers.emplace_back(random_dense(4, 2, rng));
  Dataset d;
  d.x = random_matrix(6, 3, rng);
  d.y = random_matrix(6, 2, rng);
  const Gradients g = backward_ste(net, d, 0.0);
  auto& w = std::get<Dense>(net.layers[0]).W;
  auto f = [&] { return task_loss(net, forward(net, d.x), d); };
  EXPECT_TRUE(gradients_match(g.layers[0].dW.data(), finite_difference(w.data(), f), 1e-4));
}

TEST(Train, CentroidOnlyNeverTouchesWeights) {
  Rng rng(13);
  const Dataset tr = two_moons(80, 0.1, 1), va = two_moons(40, 0.1, 2);
  TinyNet net = substitute_random(make_mlp({2, 6, 2}, ActivationKind::ReLU, LossKind::CrossEntropy, 4),
                                  VQConfig{2, 4}, 9);
  const double before = checksum(net);
  const TinyNet start = net;
  TrainConfig cfg{Stage::CentroidOnly, 0.1, 30, 0.05, 1, 16};
  train_stage(net, tr, va, cfg);
  EXPECT_EQ(checksum(net), before);
  EXPECT_NE(net, start);  // centroids did move
  cfg.stage = Stage::Joint;
  train_stage(net, tr, va, cfg);
  EXPECT_NE(checksum(net), before);
}

TEST(Train, CentroidOnlyOnLosslessDataKeepsLoss) {
  Rng rng(14);
  TinyNet net;
  LutLinear l = random_lut(4, 2, 2, 3, rng);
  net.layers.emplace_back(l);
  Dataset d = labelled(30, 4, 2, rng);
  d.x = reconstruct(l, d.x);
  const double before = task_loss(net, forward(net, d.x), d);
  TrainConfig cfg{Stage::CentroidOnly, 0.5, 20, 0.05, 3, 8};
  const StageReport r = train_stage(net, d, d, cfg);
  EXPECT_EQ(task_loss(net, forward(net, d.x), d), before);
  for (double x : r.re_loss) EXPECT_EQ(x, 0.0);
}

TEST(Train, ReportLengthsMatchIterations) {
  const Dataset tr = two_moons(50, 0.1, 3);
  TinyNet net = make_mlp({2, 4, 2}, ActivationKind::ReLU, LossKind::CrossEntropy, 2);
  const StageReport r = train_stage(net, tr, tr, TrainConfig{Stage::Joint, 0.1, 17, 0.05, 0, 8});
  EXPECT_EQ(r.task_loss.size(), 17u);
  EXPECT_EQ(r.re_loss.size(), 17u);
  EXPECT_EQ(r.val_accuracy.size(), 17u);
}

TEST(Train, CurvesDeterministicUnderSeed) {
  const Dataset tr = two_moons(120, 0.15, 5), va = two_moons(60, 0.15, 6);
  auto run = [&] {
    TinyNet net = substitute(make_mlp({2, 8, 2}, ActivationKind::ReLU, LossKind::CrossEntropy, 7), VQConfig{2, 4},
                             tr.x, 8);
    return train_stage(net, tr, va, TrainConfig{Stage::Joint, 0.1, 40, 0.05, 9, 16});
  };
  const StageReport a = run(), b = run();
  EXPECT_EQ(a.task_loss, b.task_loss);
  EXPECT_EQ(a.re_loss, b.re_loss);
  EXPECT_EQ(a.val_accuracy, b.val_accuracy);
}

// With lambda = 0 the LUT layer is a dense layer fed with Â, so the W
// trajectory of a first-layer LUT net equals that of a dense net trained on
// pre-reconstructed inputs, bit for bit.
TEST(Train, FrozenCodebookTrajectoryEqualsDenseOnReconstruction) {
  Rng rng(15);
  const Dataset tr = two_moons(64, 0.1, 10);
  TinyNet lut_net;
  lut_net.layers.emplace_back(random_lut(2, 5, 1, 4, rng));
  lut_net.layers.emplace_back(Activation{ActivationKind::ReLU});
  lut_net.layers.emplace_back(random_dense(5, 2, rng));
  const auto& l = std::get<LutLinear>(lut_net.layers[0]);
  TinyNet dense_net = lut_net;
  dense_net.layers[0] = Dense{l.W, l.bias};
  Dataset tr_hat = tr;
  tr_hat.x = reconstruct(l, tr.x);
  const Codebook frozen = l.codebook;

  const TrainConfig cfg{Stage::Joint, 0.2, 1, 0.0, 4, 16};
  for (std::size_t step = 0; step < 25; ++step) {
    TrainConfig c = cfg;
    c.seed = step;
    train_stage(lut_net, tr, Dataset{}, c);
    train_stage(dense_net, tr_hat, Dataset{}, c);
    ASSERT_EQ(std::get<LutLinear>(lut_net.layers[0]).W, std::get<Dense>(dense_net.layers[0]).W) << step;
    ASSERT_EQ(std::get<Dense>(lut_net.layers[2]).W, std::get<Dense>(dense_net.layers[2]).W) << step;
  }
  EXPECT_EQ(std::get<LutLinear>(lut_net.layers[0]).codebook, frozen);
}

TEST(Train, DivergenceAborts) {
  const Dataset tr = two_moons(40, 0.1, 1);
  TinyNet net = make_mlp({2, 16, 16, 2}, ActivationKind::ReLU, LossKind::CrossEntropy, 1);
  try {
    train_stage(net, tr, tr, TrainConfig{Stage::Joint, 1e6, 50, 0.05, 0, 8});
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Divergence);
    EXPECT_NE(std::string(e.what()).find("iteration"), std::string::npos);
  }
}

TEST(Train, ConfigValidation) {
  EXPECT_THROW((TrainConfig{Stage::Joint, 0.0}.validate()), Error);
  EXPECT_THROW((TrainConfig{Stage::Joint, 0.1, 10, -1.0}.validate()), Error);
  EXPECT_THROW((TrainConfig{Stage::Joint, 0.1, 0}.validate()), Error);
  EXPECT_NO_THROW(TrainConfig{}.validate());
}

TEST(Train, CsvHasOneRowPerIteration) {
  StageReport r;
  r.task_loss = {1.0, 0.5};
  r.re_loss = {0.1, 0.05};
  r.val_accuracy = {0.5, 0.75};
  std::ostringstream os;
  write_stage_csv(os, r);
  EXPECT_EQ(os.str(), "iter,task_loss,re_loss,val_acc\n0,1,0.10000000000000001,0.5\n1,0.5,0.050000000000000003,0.75\n");
}

TEST(Probe, MatchesCentroidStageAtSameBudget) {
  const Dataset tr = two_moons(200, 0.15, 20), va = two_moons(200, 0.15, 21);
  const TinyNet net = substitute(make_mlp({2, 8, 2}, ActivationKind::ReLU, LossKind::CrossEntropy, 5),
                                 VQConfig{2, 4}, tr.x, 6);
  TrainConfig cfg{Stage::CentroidOnly, 0.1, 50, 0.05, 7, 32};
  TinyNet copy = net;
  const double full = train_stage(copy, tr, va, cfg).val_accuracy.back();
  EXPECT_EQ(quick_accuracy_probe(net, tr, va, 50, cfg), full);
  EXPECT_THROW(quick_accuracy_probe(net, tr, va, 0), Error);
}

TEST(Probe, MoreBitsPerSubspaceProbesHigher) {
  const Dataset tr = two_moons(300, 0.15, 30), va = two_moons(300, 0.15, 31);
  PipelineConfig pc;
  pc.seed = 3;
  const TinyNet dense = pretrain_dense(tr, va, pc);
  const double coarse = quick_accuracy_probe(substitute(dense, VQConfig{8, 2}, tr.x, 1), tr, va, 100);
  const double fine = quick_accuracy_probe(substitute(dense, VQConfig{2, 16}, tr.x, 1), tr, va, 100);
  EXPECT_LT(coarse, fine);
}

// Kendall-style agreement between probe and full multistage training on a
// 3x3 (v, c) grid.
TEST(Probe, RankingAgreesWithFullTraining) {
  const Dataset tr = two_moons(300, 0.15, 40), va = two_moons(300, 0.15, 41);
  PipelineConfig pc;
  pc.seed = 5;
  const TinyNet dense = pretrain_dense(tr, va, pc);
  std::vector<double> probe, full;
  for (std::size_t v : {1, 2, 4})
    for (std::size_t c : {2, 4, 16}) {
      pc.vq = VQConfig{v, c};
      const TinyNet conv = substitute(dense, pc.vq, tr.x, mix_seed(pc.seed, 3));
      probe.push_back(quick_accuracy_probe(conv, tr, va, 60));
      full.push_back(convert_and_train(dense, tr, va, pc).final_accuracy);
    }
  std::size_t agree = 0, pairs = 0;
  for (std::size_t i = 0; i < probe.size(); ++i)
    for (std::size_t j = i + 1; j < probe.size(); ++j) {
      if (full[i] == full[j]) continue;  // no order to agree with
      ++pairs;
      agree += (probe[i] - probe[j]) * (full[i] - full[j]) > 0;
    }
  ASSERT_GT(pairs, 0u);
  EXPECT_GE(static_cast<double>(agree), 0.7 * static_cast<double>(pairs)) << agree << "/" << pairs;
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(16);
  TinyNet net;
  LutLinear l = random_lut(5, 3, 2, 4, rng);
  l.vq.metric = Metric::L1;
  l.vq.lut_precision = LutPrecision::INT8;
  net.layers.emplace_back(l);
  net.layers.emplace_back(Activation{ActivationKind::Tanh});
  net.layers.emplace_back(random_dense(3, 2, rng));
  ByteWriter w;
  write_checkpoint(w, net);
  ByteReader r(w.bytes());
  EXPECT_EQ(read_checkpoint(r), net);
}

TEST(Checkpoint, CorruptionDetected) {
  Rng rng(17);
  TinyNet net;
  net.layers.emplace_back(random_lut(4, 2, 2, 2, rng));
  ByteWriter w;
  write_checkpoint(w, net);
  auto bytes = w.bytes();
  bytes.pop_back();
  ByteReader truncated(bytes);
  try {
    read_checkpoint(truncated);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Corruption);
  }
  auto tagged = w.bytes();
  tagged[12 + 8 + 1] = 9;  // first layer tag, after header and loss byte
  ByteReader bad_tag(tagged);
  EXPECT_THROW(read_checkpoint(bad_tag), Error);
}

TEST(ToyData, ShapesAndBalance) {
  const Dataset m = two_moons(101, 0.1, 1);
  EXPECT_EQ(m.x.rows(), 101u);
  EXPECT_EQ(m.x.cols(), 2u);
  EXPECT_EQ(std::count(m.labels.begin(), m.labels.end(), 1u), 50);
  const Dataset g = glyphs8x8(40, 1.0, 2);
  EXPECT_EQ(g.x.cols(), 64u);
  for (std::size_t c = 0; c < kGlyphClasses; ++c) EXPECT_EQ(std::count(g.labels.begin(), g.labels.end(), c), 10);
  EXPECT_EQ(two_moons(30, 0.2, 9).x, two_moons(30, 0.2, 9).x);
}

TEST(ToyData, GlyphsAreLearnableThroughLutLayers) {
  const Dataset tr = glyphs8x8(400, 1.0, 3), va = glyphs8x8(200, 1.0, 4);
  PipelineConfig pc;
  pc.hidden = {32};
  pc.vq = VQConfig{4, 8};
  pc.pretrain_iterations = 600;
  pc.centroid_iterations = 100;
  pc.joint_iterations = 100;
  const PipelineResult r = run_pipeline(tr, va, pc);
  EXPECT_GT(r.dense_accuracy, 0.9);
  EXPECT_GT(r.final_accuracy, 0.8);
}

}  // namespace
}  // namespace lutdla
