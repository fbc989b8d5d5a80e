#pragma once

#include <limits>
#include <string>
#include <vector>

#include "mvproto/model.hpp"

namespace mvproto {

/// One line of the training log.
struct EpochRecord {
  int stage = 0;
  int variable = -1;  // stage 1 only
  int epoch = 0;      // 1-based; 0 marks the pre-training holdout measurement
  std::string phase;  // "train" or "holdout"
  double loss = 0.0;
  double cross_entropy = 0.0;
  double diversity = 0.0;
  double similarity = 0.0;
  double coverage = 0.0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
};
using TrainLog = std::vector<EpochRecord>;

std::string train_log_csv(const TrainLog& log);

/// Stage 1: contrastive pretraining of each encoder on its own variable;
/// touches nothing but encoder parameters. Encoders train independently and
/// may run on parallel threads with per-variable seeds.
void pretrain_encoders(Model& model, const Dataset& train, TrainLog* log = nullptr);

/// Stage 2: initializes single-variable prototype layers and the diagnostic
/// head, then trains them on cross entropy plus the per-layer regularizers.
/// Encoders stay frozen.
void train_single_variable_stage(Model& model, const Dataset& train, TrainLog* log = nullptr);

/// Stage 3: initializes the multivariable layer at sampled training
/// representations and trains only it and the final head; everything else
/// stays frozen.
void train_multivariable_stage(Model& model, const Dataset& train, TrainLog* log = nullptr);

/// Runs whichever stages are still missing, in order.
void train_remaining_stages(Model& model, const Dataset& train, TrainLog* log = nullptr);

struct Prediction {
  int label = 0;
  Eigen::VectorXd probabilities;
  Eigen::VectorXd multivariable_similarities;
};

Prediction predict(const Model& model, const Sample& sample);

struct Evaluation {
  double accuracy = 0.0;
  Eigen::VectorXd per_class_accuracy;
  Eigen::MatrixXd confusion;  // rows = true class, columns = predicted
};

Evaluation evaluate(const Model& model, const Dataset& data);

/// Concatenated similarity vector of one sample (stages 1-2 must be done).
TensorPtr multivariable_vector(const Model& model, const Sample& sample);

/// Multivariable representations of every sample, one row each; computed
/// sample-by-sample with recording disabled.
RowMatrixXd multivariable_matrix(const Model& model, const Dataset& data);

}  // namespace mvproto
