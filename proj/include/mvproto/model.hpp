#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvproto/dataset.hpp"
#include "mvproto/encoder.hpp"
#include "mvproto/losses.hpp"
#include "mvproto/prototype.hpp"

namespace mvproto {

struct TrainConfig {
  int stage1_epochs = 30;
  int stage2_epochs = 40;
  int stage3_epochs = 40;
  int batch_size = 32;
  int pairs_per_epoch = 4096;
  double learning_rate = 1e-3;
  Eigen::Index hidden_size = 32;
  Eigen::Index single_prototype_count = 4;
  Eigen::Index multi_prototype_count = 64;
  RegularizerWeights regularizers;
  std::uint64_t seed = 1;
  int stage1_threads = 0;  // 0 = one worker per variable, capped by hardware

  void validate() const;
};

/// Shape and preprocessing snapshot of the data the model was built for.
struct DataProfile {
  int dimensions = 0;
  Eigen::Index length = 0;
  std::vector<std::string> class_names;
  std::optional<NormalizationStats> normalization;

  int classes() const { return static_cast<int>(class_names.size()); }
};

/// The full two-level classifier: per-variable encoders, single-variable
/// prototype layers, the multivariable prototype layer and classifier heads.
/// Stage flags track the three-phase training procedure; layers appear as
/// their stage completes.
struct Model {
  TrainConfig config;
  DataProfile data;
  std::vector<EncoderParams> encoders;
  std::vector<PrototypeLayer> single_layers;
  PrototypeLayer multi_layer;
  TensorPtr stage2_head_weights;  // {d * single_count, classes}, diagnostic head
  TensorPtr stage2_head_bias;    // {classes}
  TensorPtr head_weights;        // {multi_count, classes}, final head
  TensorPtr head_bias;           // {classes}
  std::array<bool, 3> stage_done{false, false, false};

  bool complete() const { return stage_done[0] && stage_done[1] && stage_done[2]; }
  /// Width of the concatenated single-variable similarity vector.
  Eigen::Index representation_width() const {
    return static_cast<Eigen::Index>(data.dimensions) * config.single_prototype_count;
  }
  /// Every parameter present at the current stage, with stable names.
  std::vector<std::pair<std::string, TensorPtr>> named_parameters() const;
};

/// Builds a stage-0 model for a (normalized) training set: initialized
/// encoders, no prototype layers yet.
Model make_model(const Dataset& train, TrainConfig config);

// Versioned self-describing container; load(save(m)) reproduces every
// parameter bitwise and refuses unknown versions.
void save_model(const Model& model, std::ostream& out);
Model load_model(std::istream& in);
void save_model_file(const Model& model, const std::filesystem::path& path);
Model load_model_file(const std::filesystem::path& path);

}  // namespace mvproto
