#include "lutdla/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "lutdla/rng.hpp"

namespace lutdla {
namespace {

constexpr double kDivergence = 1e6;

void sgd(std::vector<double>& x, const std::vector<double>& g, double lr) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= lr * g[i];
}
void sgd(Matrix& x, const Matrix& g, double lr) { sgd(x.data(), g.data(), lr); }

void apply(TinyNet& net, const Gradients& g, Stage stage, double lr) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerGrad& lg = g.layers[i];
    if (auto* d = std::get_if<Dense>(&net.layers[i])) {
      if (stage == Stage::CentroidOnly) continue;
      sgd(d->W, lg.dW, lr);
      sgd(d->bias, lg.dbias, lr);
    } else if (auto* l = std::get_if<LutLinear>(&net.layers[i])) {
      for (std::size_t k = 0; k < l->codebook.centroids.size(); ++k) sgd(l->codebook.centroids[k], lg.dcentroids[k], lr);
      if (stage == Stage::CentroidOnly) continue;
      sgd(l->W, lg.dW, lr);
      sgd(l->bias, lg.dbias, lr);
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "train: learning rate must be > 0");
  require(lambda_re >= 0.0 && std::isfinite(lambda_re), "train: lambda_re must be >= 0");
  require(iterations >= 1, "train: need at least one iteration");
  require(batch_size >= 1, "train: batch size must be >= 1");
}

StageReport train_stage(TinyNet& net, const Dataset& train, const Dataset& val, const TrainConfig& cfg) {
  cfg.validate();
  net.validate();
  require(train.size() >= 1, "train: empty training set");
  const auto start = std::chrono::steady_clock::now();
  const bool has_labels = net.loss == LossKind::CrossEntropy && val.size() > 0;

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  std::vector<std::size_t> rows;

  StageReport report;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    rows.clear();
    while (rows.size() < std::min(cfg.batch_size, train.size())) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        cursor = 0;
      }
      rows.push_back(order[cursor++]);
    }
    const Gradients g = backward_ste(net, train.subset(rows), cfg.lambda_re);
    const double total = g.total();
    if (!std::isfinite(total) || total > kDivergence) {
      std::ostringstream os;
      os << "training diverged at iteration " << it << ": task loss " << g.task_loss << ", reconstruction loss "
         << g.re_loss << " (learning rate " << cfg.learning_rate << ")";
      fail(ErrorKind::Divergence, os.str());
    }
    apply(net, g, cfg.stage, cfg.learning_rate);
    report.task_loss.push_back(g.task_loss);
    report.re_loss.push_back(g.re_loss);
    report.val_accuracy.push_back(has_labels ? accuracy(net, val) : std::numeric_limits<double>::quiet_NaN());
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_stage_csv(std::ostream& out, const StageReport& report) {
  out << "iter,task_loss,re_loss,val_acc\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < report.task_loss.size(); ++i)
    out << i << ',' << report.task_loss[i] << ',' << report.re_loss[i] << ',' << report.val_accuracy[i] << '\n';
  out.precision(old);
}

double quick_accuracy_probe(const TinyNet& net, const Dataset& train, const Dataset& val, std::size_t budget,
                            const TrainConfig& base) {
  require(budget >= 1, "probe: budget must be >= 1");
  TinyNet copy = net;
  TrainConfig cfg = base;
  cfg.stage = Stage::CentroidOnly;
  cfg.iterations = budget;
  return train_stage(copy, train, val, cfg).val_accuracy.back();
}

TinyNet pretrain_dense(const Dataset& train, const Dataset& val, const PipelineConfig& cfg, StageReport* report) {
  require(train.size() >= 1 && !train.labels.empty(), "pipeline: needs a labelled training set");
  std::size_t classes = 0;
  for (std::size_t l : train.labels) classes = std::max(classes, l + 1);
  std::vector<std::size_t> widths{train.x.cols()};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(std::max<std::size_t>(classes, 2));
  TinyNet net = make_mlp(widths, cfg.activation, LossKind::CrossEntropy, mix_seed(cfg.seed, 1));
  TrainConfig tc{Stage::Joint, cfg.learning_rate, cfg.pretrain_iterations, 0.0, mix_seed(cfg.seed, 2), cfg.batch_size};
  StageReport r = train_stage(net, train, val, tc);
  if (report) *report = std::move(r);
  return net;
}

PipelineResult convert_and_train(const TinyNet& dense, const Dataset& train, const Dataset& val,
                                 const PipelineConfig& cfg) {
  PipelineResult res;
  res.dense = dense;
  res.dense_accuracy = accuracy(dense, val);
  res.converted = cfg.init == CodebookInit::KMeans ? substitute(dense, cfg.vq, train.x, mix_seed(cfg.seed, 3))
                                                   : substitute_random(dense, cfg.vq, mix_seed(cfg.seed, 3));
  res.converted_accuracy = accuracy(res.converted, val);
  res.trained = res.converted;
  if (cfg.multistage) {
    TrainConfig tc{Stage::CentroidOnly, cfg.learning_rate, cfg.centroid_iterations, cfg.lambda_re,
                   mix_seed(cfg.seed, 4), cfg.batch_size};
    res.centroid_stage = train_stage(res.trained, train, val, tc);
  }
  res.after_centroid_stage = res.trained;
  TrainConfig tc{Stage::Joint, cfg.learning_rate, cfg.joint_iterations, cfg.lambda_re, mix_seed(cfg.seed, 5),
                 cfg.batch_size};
  res.joint_stage = train_stage(res.trained, train, val, tc);
  res.final_accuracy = accuracy(res.trained, val);
  return res;
}

PipelineResult run_pipeline(const Dataset& train, const Dataset& val, const PipelineConfig& cfg) {
  StageReport pre;
  const TinyNet dense = pretrain_dense(train, val, cfg, &pre);
  PipelineResult res = convert_and_train(dense, train, val, cfg);
  res.pretrain = std::move(pre);
  return res;
}

}  // namespace lutdla
