#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "lutdla/matrix.hpp"
#include "lutdla/serialize.hpp"
#include "lutdla/vq.hpp"

namespace lutdla {

enum class ActivationKind : std::uint8_t { ReLU = 0, Tanh = 1 };
enum class LossKind : std::uint8_t { CrossEntropy = 0, MSE = 1 };

struct Dense {
  Matrix W;  ///< K x N
  std::vector<double> bias;
  friend bool operator==(const Dense&, const Dense&) = default;
};

/// Linear layer whose input is replaced by its centroid reconstruction.
/// Keeps W so the PSum table can be rebuilt after either side changes.
struct LutLinear {
  Codebook codebook;
  Matrix W;
  std::vector<double> bias;
  VQConfig vq;
  friend bool operator==(const LutLinear&, const LutLinear&) = default;
};

struct Activation {
  ActivationKind kind = ActivationKind::ReLU;
  friend bool operator==(const Activation&, const Activation&) = default;
};

using Layer = std::variant<Dense, LutLinear, Activation>;

struct TinyNet {
  std::vector<Layer> layers;
  LossKind loss = LossKind::CrossEntropy;

  /// Throws InvalidInput when consecutive layer shapes disagree.
  void validate() const;
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_parameters() const;
  std::size_t num_centroid_parameters() const;

  friend bool operator==(const TinyNet&, const TinyNet&) = default;
};

/// Dense layers of the given widths with an activation between each pair.
/// He-style Gaussian init, zero bias.
TinyNet make_mlp(const std::vector<std::size_t>& widths, ActivationKind act, LossKind loss,
                 std::uint64_t seed);

/// Inputs plus either class labels (cross-entropy) or targets (MSE).
struct Dataset {
  Matrix x;
  std::vector<std::size_t> labels;
  Matrix y;

  std::size_t size() const { return x.rows(); }
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

/// Â for one LUT layer: encode against the codebook, then decode.
Matrix reconstruct(const LutLinear& layer, const Matrix& a);

/// Per-layer values recorded by forward() for the backward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;  ///< input of every layer
  std::vector<Matrix> recon;   ///< Â for LUT layers, empty otherwise
  Matrix output;
};

/// LUT layers compute Â·W in double precision (the training view).
Matrix forward(const TinyNet& net, const Matrix& x, ForwardCache* cache = nullptr);

/// Inference view: LUT layers run encode -> build_lut -> lut_gemm.
Matrix forward_lut(const TinyNet& net, const Matrix& x);

/// ||SG(Â W) - A W||^2 + ||Â W - SG(A W)||^2 (both terms have the same value).
double reconstruction_loss(const Matrix& a, const Matrix& a_hat, const Matrix& w);

/// Mean over rows; cross-entropy uses softmax of the outputs, MSE is
/// 0.5 * squared error summed over columns.
double task_loss(const TinyNet& net, const Matrix& output, const Dataset& batch);

struct LayerGrad {
  Matrix dW;
  std::vector<double> dbias;
  std::vector<Matrix> dcentroids;  ///< one c x v matrix per subspace
};

struct Gradients {
  std::vector<LayerGrad> layers;
  Matrix dinput;
  double task_loss = 0.0;
  double re_loss = 0.0;  ///< sum over LUT layers of L_re / rows
  double total() const;
};

/// Loss = task + lambda_re * sum_l L_re(l) / rows. Gradients follow the
/// straight-through rule: W and upstream activations see the layer as dense
/// (fed with Â and A respectively), centroids are driven by the second L_re
/// term only.
Gradients backward_ste(const TinyNet& net, const Dataset& batch, double lambda_re);

/// Every Dense layer becomes a LutLinear whose codebook is fit by k-means on
/// the inputs that layer sees for `calibration`. W and bias are copied.
TinyNet substitute(const TinyNet& net, const VQConfig& vq, const Matrix& calibration, std::uint64_t seed);

/// Same substitution with Gaussian codebooks instead of k-means.
TinyNet substitute_random(const TinyNet& net, const VQConfig& vq, std::uint64_t seed, double stddev = 1.0);

double accuracy(const TinyNet& net, const Dataset& data);

void write_checkpoint(ByteWriter& w, const TinyNet& net);
TinyNet read_checkpoint(ByteReader& r);
void save_checkpoint(const std::filesystem::path& path, const TinyNet& net);
TinyNet load_checkpoint(const std::filesystem::path& path);

}  // namespace lutdla
