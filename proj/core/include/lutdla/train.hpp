#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "lutdla/nn.hpp"

namespace lutdla {

enum class Stage { CentroidOnly, Joint };

struct TrainConfig {
  Stage stage = Stage::Joint;
  double learning_rate = 0.1;
  std::size_t iterations = 200;
  double lambda_re = 0.05;
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;

  void validate() const;
};

struct StageReport {
  std::vector<double> task_loss;     ///< per iteration, on the training batch
  std::vector<double> re_loss;       ///< lambda-weighted, per iteration
  std::vector<double> val_accuracy;  ///< after each update; NaN for MSE nets
  double wall_seconds = 0.0;
};

/// Plain SGD. Batches come from a seeded shuffle of `train`, reshuffled each
/// pass. CentroidOnly leaves every W and bias untouched; Joint updates
/// everything. Throws Divergence when the loss turns non-finite or exceeds 1e6.
StageReport train_stage(TinyNet& net, const Dataset& train, const Dataset& val, const TrainConfig& cfg);

/// iter,task_loss,re_loss,val_acc
void write_stage_csv(std::ostream& out, const StageReport& report);

/// CentroidOnly for `budget` iterations on a copy of `net`; final validation accuracy.
double quick_accuracy_probe(const TinyNet& net, const Dataset& train, const Dataset& val, std::size_t budget,
                            const TrainConfig& base = {});

enum class CodebookInit { KMeans, Random };

struct PipelineConfig {
  VQConfig vq;
  std::vector<std::size_t> hidden = {16, 16};
  ActivationKind activation = ActivationKind::ReLU;
  std::size_t pretrain_iterations = 600;
  std::size_t centroid_iterations = 200;
  std::size_t joint_iterations = 300;
  double learning_rate = 0.1;
  double lambda_re = 0.05;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  /// false: skip the centroid-only stage (single-stage baseline)
  bool multistage = true;
  CodebookInit init = CodebookInit::KMeans;
};

struct PipelineResult {
  TinyNet dense;
  TinyNet converted;  ///< right after substitution
  TinyNet after_centroid_stage;  ///< equals converted when the stage is skipped
  TinyNet trained;
  double dense_accuracy = 0.0;
  double converted_accuracy = 0.0;
  double final_accuracy = 0.0;
  StageReport pretrain, centroid_stage, joint_stage;
};

/// Dense pretraining, substitution, optional centroid-only stage, joint stage.
PipelineResult run_pipeline(const Dataset& train, const Dataset& val, const PipelineConfig& cfg);

/// Dense pretraining only; run_pipeline starts from this net.
TinyNet pretrain_dense(const Dataset& train, const Dataset& val, const PipelineConfig& cfg,
                       StageReport* report = nullptr);

/// Conversion and fine-tuning of an already trained dense net.
PipelineResult convert_and_train(const TinyNet& dense, const Dataset& train, const Dataset& val,
                                 const PipelineConfig& cfg);

}  // namespace lutdla
