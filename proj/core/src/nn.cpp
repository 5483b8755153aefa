#include "lutdla/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lutdla/rng.hpp"

namespace lutdla {
namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

// (in, out) of a linear layer, {0, 0} for activations
std::pair<std::size_t, std::size_t> linear_dims(const Layer& layer) {
  return std::visit(Overloaded{[](const Dense& d) { return std::pair{d.W.rows(), d.W.cols()}; },
                               [](const LutLinear& l) { return std::pair{l.W.rows(), l.W.cols()}; },
                               [](const Activation&) { return std::pair<std::size_t, std::size_t>{0, 0}; }},
                    layer);
}

Matrix affine(const Matrix& a, const Matrix& w, const std::vector<double>& bias) {
  Matrix y = matmul(a, w);
  for (std::size_t m = 0; m < y.rows(); ++m)
    for (std::size_t n = 0; n < y.cols(); ++n) y(m, n) += bias[n];
  return y;
}

Matrix activate(ActivationKind kind, const Matrix& x) {
  Matrix y = x;
  for (double& e : y.data()) e = kind == ActivationKind::ReLU ? std::max(e, 0.0) : std::tanh(e);
  return y;
}

std::vector<double> column_sums(const Matrix& g) {
  std::vector<double> s(g.cols(), 0.0);
  for (std::size_t m = 0; m < g.rows(); ++m)
    for (std::size_t n = 0; n < g.cols(); ++n) s[n] += g(m, n);
  return s;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

void add_scaled(Matrix& dst, const Matrix& src, double s) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += s * src.data()[i];
}

// d(task)/d(output), already divided by the batch size
Matrix output_grad(const TinyNet& net, const Matrix& out, const Dataset& batch) {
  const double inv = 1.0 / static_cast<double>(out.rows());
  Matrix g(out.rows(), out.cols());
  if (net.loss == LossKind::MSE) {
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = (out.data()[i] - batch.y.data()[i]) * inv;
    return g;
  }
  for (std::size_t m = 0; m < out.rows(); ++m) {
    auto row = out.row(m);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double x : row) z += std::exp(x - mx);
    for (std::size_t n = 0; n < out.cols(); ++n) g(m, n) = std::exp(row[n] - mx) / z * inv;
    g(m, batch.labels[m]) -= inv;
  }
  return g;
}

void check_batch(const TinyNet& net, const Matrix& out, const Dataset& batch) {
  if (net.loss == LossKind::MSE) {
    require(batch.y.rows() == out.rows() && batch.y.cols() == out.cols(), "task_loss: target shape mismatch");
    return;
  }
  require(batch.labels.size() == out.rows(), "task_loss: need one label per row");
  for (std::size_t l : batch.labels) require(l < out.cols(), "task_loss: label out of range");
}

}  // namespace

void TinyNet::validate() const {
  require(!layers.empty(), "net: no layers");
  std::size_t width = 0;
  bool any_linear = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto [in, out] = linear_dims(layers[i]);
    if (in == 0) continue;
    require(out >= 1, "net: layer " + std::to_string(i) + " has no outputs");
    require(!any_linear || in == width, "net: layer " + std::to_string(i) + " expects " + std::to_string(in) +
                                            " inputs but receives " + std::to_string(width));
    std::visit(Overloaded{[&](const Dense& d) { require(d.bias.size() == out, "net: bias size mismatch"); },
                          [&](const LutLinear& l) {
                            require(l.bias.size() == out, "net: bias size mismatch");
                            l.vq.validate();
                            l.codebook.validate();
                            require(l.codebook.K == in && l.codebook.v == l.vq.v && l.codebook.c() == l.vq.c,
                                    "net: codebook of layer " + std::to_string(i) + " does not match W / vq config");
                          },
                          [](const Activation&) {}},
               layers[i]);
    width = out;
    any_linear = true;
  }
  require(any_linear, "net: needs at least one linear layer");
}

std::size_t TinyNet::input_dim() const {
  for (const Layer& l : layers)
    if (const auto [in, out] = linear_dims(l); in) return in;
  return 0;
}

std::size_t TinyNet::output_dim() const {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it)
    if (const auto [in, out] = linear_dims(*it); in) return out;
  return 0;
}

std::size_t TinyNet::num_parameters() const {
  std::size_t total = 0;
  for (const Layer& l : layers)
    if (const auto [in, out] = linear_dims(l); in) total += in * out + out;
  return total + num_centroid_parameters();
}

std::size_t TinyNet::num_centroid_parameters() const {
  std::size_t total = 0;
  for (const Layer& l : layers)
    if (const auto* lut = std::get_if<LutLinear>(&l))
      for (const Matrix& z : lut->codebook.centroids) total += z.size();
  return total;
}

TinyNet make_mlp(const std::vector<std::size_t>& widths, ActivationKind act, LossKind loss, std::uint64_t seed) {
  require(widths.size() >= 2, "make_mlp: need input and output widths");
  TinyNet net;
  net.loss = loss;
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    require(widths[i] >= 1 && widths[i + 1] >= 1, "make_mlp: widths must be >= 1");
    Dense d{Matrix(widths[i], widths[i + 1]), std::vector<double>(widths[i + 1], 0.0)};
    const double sd = std::sqrt(2.0 / static_cast<double>(widths[i]));
    for (double& x : d.W.data()) x = rng.normal(0.0, sd);
    net.layers.emplace_back(std::move(d));
    if (i + 2 < widths.size()) net.layers.emplace_back(Activation{act});
  }
  return net;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.x = Matrix(rows.size(), x.cols());
  if (!y.empty()) out.y = Matrix(rows.size(), y.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(x.row(rows[i]).begin(), x.cols(), out.x.row(i).begin());
    if (!y.empty()) std::copy_n(y.row(rows[i]).begin(), y.cols(), out.y.row(i).begin());
    if (!labels.empty()) out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

Matrix reconstruct(const LutLinear& layer, const Matrix& a) {
  return decode(encode(a, layer.codebook, layer.vq.metric, layer.vq.dist_precision), layer.codebook);
}

Matrix forward(const TinyNet& net, const Matrix& x, ForwardCache* cache) {
  require(x.cols() == net.input_dim(), "forward: input width does not match the net");
  if (cache) {
    cache->inputs.clear();
    cache->recon.clear();
  }
  Matrix h = x;
  for (const Layer& layer : net.layers) {
    Matrix recon;
    Matrix next = std::visit(Overloaded{[&](const Dense& d) { return affine(h, d.W, d.bias); },
                                        [&](const LutLinear& l) {
                                          recon = reconstruct(l, h);
                                          return affine(recon, l.W, l.bias);
                                        },
                                        [&](const Activation& a) { return activate(a.kind, h); }},
                             layer);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->recon.push_back(std::move(recon));
    }
    h = std::move(next);
  }
  if (cache) cache->output = h;
  return h;
}

Matrix forward_lut(const TinyNet& net, const Matrix& x) {
  require(x.cols() == net.input_dim(), "forward_lut: input width does not match the net");
  Matrix h = x;
  for (const Layer& layer : net.layers) {
    h = std::visit(Overloaded{[&](const Dense& d) { return affine(h, d.W, d.bias); },
                              [&](const LutLinear& l) {
                                const auto enc = encode(h, l.codebook, l.vq.metric, l.vq.dist_precision);
                                Matrix y = lut_gemm(enc, build_lut(l.codebook, l.W, l.vq.lut_precision));
                                for (std::size_t m = 0; m < y.rows(); ++m)
                                  for (std::size_t n = 0; n < y.cols(); ++n) y(m, n) += l.bias[n];
                                return y;
                              },
                              [&](const Activation& a) { return activate(a.kind, h); }},
                   layer);
  }
  return h;
}

double reconstruction_loss(const Matrix& a, const Matrix& a_hat, const Matrix& w) {
  require(a.rows() == a_hat.rows() && a.cols() == a_hat.cols() && a.cols() == w.rows(),
          "reconstruction_loss: shape mismatch");
  const Matrix d = sub(matmul(a_hat, w), matmul(a, w));
  double s = 0.0;
  for (double x : d.data()) s += x * x;
  return 2.0 * s;
}

double task_loss(const TinyNet& net, const Matrix& out, const Dataset& batch) {
  check_batch(net, out, batch);
  double total = 0.0;
  if (net.loss == LossKind::MSE) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d = out.data()[i] - batch.y.data()[i];
      total += 0.5 * d * d;
    }
  } else {
    for (std::size_t m = 0; m < out.rows(); ++m) {
      auto row = out.row(m);
      const double mx = *std::max_element(row.begin(), row.end());
      double z = 0.0;
      for (double x : row) z += std::exp(x - mx);
      total += mx + std::log(z) - row[batch.labels[m]];
    }
  }
  return total / static_cast<double>(out.rows());
}

double Gradients::total() const { return task_loss + re_loss; }

Gradients backward_ste(const TinyNet& net, const Dataset& batch, double lambda_re) {
  require(lambda_re >= 0.0, "backward: lambda_re must be >= 0");
  require(batch.size() >= 1, "backward: empty batch");
  ForwardCache cache;
  const Matrix out = forward(net, batch.x, &cache);
  Gradients g;
  g.task_loss = task_loss(net, out, batch);
  g.layers.resize(net.layers.size());

  const double inv_rows = 1.0 / static_cast<double>(batch.size());
  Matrix dy = output_grad(net, out, batch);
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const Matrix& in = cache.inputs[li];
    LayerGrad& lg = g.layers[li];
    std::visit(
        Overloaded{
            [&](const Dense& d) {
              lg.dW = matmul_at_b(in, dy);
              lg.dbias = column_sums(dy);
              dy = matmul_a_bt(dy, d.W);
            },
            [&](const LutLinear& l) {
              const Matrix& a_hat = cache.recon[li];
              // STE: W sees Â, the upstream activations see a dense layer
              lg.dW = matmul_at_b(a_hat, dy);
              lg.dbias = column_sums(dy);
              Matrix da = matmul_a_bt(dy, l.W);

              const Matrix diff = sub(matmul(a_hat, l.W), matmul(in, l.W));
              double re = 0.0;
              for (double x : diff.data()) re += x * x;
              g.re_loss += lambda_re * 2.0 * re * inv_rows;

              const double s = 2.0 * lambda_re * inv_rows;
              // both terms reach W: -2 A^T D from the first, 2 Â^T D from the second
              add_scaled(lg.dW, matmul_at_b(sub(a_hat, in), diff), s);
              const Matrix pull = matmul_a_bt(diff, l.W);  // D W^T
              add_scaled(da, pull, -s);                    // first term, commitment on A

              // second term, scattered onto the selected centroids
              const auto enc = encode(in, l.codebook, l.vq.metric, l.vq.dist_precision);
              const std::size_t v = l.codebook.v, K = l.codebook.K;
              lg.dcentroids.clear();
              for (const Matrix& z : l.codebook.centroids) lg.dcentroids.emplace_back(z.rows(), z.cols());
              for (std::size_t m = 0; m < in.rows(); ++m)
                for (std::size_t k = 0; k < enc.subspaces; ++k) {
                  auto dz = lg.dcentroids[k].row(enc.at(m, k));
                  for (std::size_t i = 0; i < v && k * v + i < K; ++i) dz[i] += s * pull(m, k * v + i);
                }
              dy = std::move(da);
            },
            [&](const Activation& a) {
              for (std::size_t i = 0; i < dy.size(); ++i) {
                const double x = in.data()[i];
                if (a.kind == ActivationKind::ReLU) {
                  if (x <= 0.0) dy.data()[i] = 0.0;
                } else {
                  const double t = std::tanh(x);
                  dy.data()[i] *= 1.0 - t * t;
                }
              }
            }},
        net.layers[li]);
  }
  g.dinput = std::move(dy);
  return g;
}

namespace {

// Inputs seen by every linear layer of `net` for the calibration batch.
std::vector<Matrix> layer_inputs(const TinyNet& net, const Matrix& calibration) {
  ForwardCache cache;
  forward(net, calibration, &cache);
  return cache.inputs;
}

template <class MakeCodebook>
TinyNet substitute_with(const TinyNet& net, const VQConfig& vq, MakeCodebook make) {
  net.validate();
  vq.validate();
  TinyNet out;
  out.loss = net.loss;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (const auto* d = std::get_if<Dense>(&net.layers[i])) {
      require(d->W.rows() >= 1, "substitute: layer with no inputs");
      out.layers.emplace_back(LutLinear{make(i, d->W.rows()), d->W, d->bias, vq});
    } else {
      out.layers.push_back(net.layers[i]);
    }
  }
  out.validate();
  return out;
}

}  // namespace

TinyNet substitute(const TinyNet& net, const VQConfig& vq, const Matrix& calibration, std::uint64_t seed) {
  require(calibration.rows() >= 1, "substitute: calibration batch is empty");
  const auto inputs = layer_inputs(net, calibration);
  return substitute_with(net, vq, [&](std::size_t i, std::size_t) {
    return fit_codebook(inputs[i], vq, mix_seed(seed, i));
  });
}

TinyNet substitute_random(const TinyNet& net, const VQConfig& vq, std::uint64_t seed, double stddev) {
  return substitute_with(net, vq, [&](std::size_t i, std::size_t K) {
    return random_codebook(K, vq.v, vq.c, mix_seed(seed, i), stddev);
  });
}

double accuracy(const TinyNet& net, const Dataset& data) {
  require(!data.labels.empty() && data.labels.size() == data.size(), "accuracy: dataset has no labels");
  const Matrix out = forward(net, data.x);
  std::size_t hits = 0;
  for (std::size_t m = 0; m < out.rows(); ++m) {
    auto row = out.row(m);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    hits += best == data.labels[m];
  }
  return static_cast<double>(hits) / static_cast<double>(out.rows());
}

// Checkpoint payload: u8 loss kind, then per layer a u8 tag
//   0 Dense      matrix W, u64 n, n x f64 bias
//   1 LutLinear  u8 metric, u8 dist precision, u8 lut precision, codebook, matrix W, bias
//   2 Activation u8 kind
void write_checkpoint(ByteWriter& w, const TinyNet& net) {
  net.validate();
  const std::uint64_t dims[] = {net.layers.size()};
  w.header(ContainerKind::Checkpoint, dims);
  w.u8(static_cast<std::uint8_t>(net.loss));
  auto bias = [&](const std::vector<double>& b) {
    w.u64(b.size());
    for (double x : b) w.f64(x);
  };
  for (const Layer& layer : net.layers) {
    std::visit(Overloaded{[&](const Dense& d) {
                            w.u8(0);
                            write_matrix(w, d.W);
                            bias(d.bias);
                          },
                          [&](const LutLinear& l) {
                            w.u8(1);
                            w.u8(static_cast<std::uint8_t>(l.vq.metric));
                            w.u8(static_cast<std::uint8_t>(l.vq.dist_precision));
                            w.u8(static_cast<std::uint8_t>(l.vq.lut_precision));
                            write_codebook(w, l.codebook);
                            write_matrix(w, l.W);
                            bias(l.bias);
                          },
                          [&](const Activation& a) {
                            w.u8(2);
                            w.u8(static_cast<std::uint8_t>(a.kind));
                          }},
               layer);
  }
}

TinyNet read_checkpoint(ByteReader& r) {
  const auto dims = r.header(ContainerKind::Checkpoint);
  if (dims.size() != 1) fail(ErrorKind::Corruption, "checkpoint container needs 1 dim");
  TinyNet net;
  const std::uint8_t loss = r.u8();
  if (loss > 1) fail(ErrorKind::Corruption, "checkpoint: unknown loss kind");
  net.loss = static_cast<LossKind>(loss);
  auto bias = [&] {
    const std::uint64_t n = r.u64();
    if (n > r.remaining() / 8) fail(ErrorKind::Corruption, "checkpoint: bias truncated");
    std::vector<double> b(n);
    for (double& x : b) x = r.f64();
    return b;
  };
  auto enum_byte = [&](std::uint8_t max, const char* what) {
    const std::uint8_t x = r.u8();
    if (x > max) fail(ErrorKind::Corruption, std::string("checkpoint: bad ") + what);
    return x;
  };
  for (std::uint64_t i = 0; i < dims[0]; ++i) {
    switch (r.u8()) {
      case 0: {
        Matrix W = read_matrix(r);
        net.layers.emplace_back(Dense{std::move(W), bias()});
        break;
      }
      case 1: {
        LutLinear l;
        l.vq.metric = static_cast<Metric>(enum_byte(2, "metric"));
        l.vq.dist_precision = static_cast<DistPrecision>(enum_byte(1, "distance precision"));
        l.vq.lut_precision = static_cast<LutPrecision>(enum_byte(1, "lut precision"));
        l.codebook = read_codebook(r);
        l.vq.v = l.codebook.v;
        l.vq.c = l.codebook.c();
        l.W = read_matrix(r);
        l.bias = bias();
        net.layers.emplace_back(std::move(l));
        break;
      }
      case 2:
        net.layers.emplace_back(Activation{static_cast<ActivationKind>(enum_byte(1, "activation"))});
        break;
      default:
        fail(ErrorKind::Corruption, "checkpoint: unknown layer tag");
    }
  }
  if (r.remaining() != 0) fail(ErrorKind::Corruption, "checkpoint: trailing bytes");
  try {
    net.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Corruption, std::string("checkpoint: ") + e.what());
  }
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const TinyNet& net) {
  ByteWriter w;
  write_checkpoint(w, net);
  write_file_bytes(path, w.bytes());
}

TinyNet load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  return read_checkpoint(r);
}

}  // namespace lutdla
