#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mvproto/training.hpp"

namespace mvproto {

/// One single-variable prototype represented by its nearest encoded
/// training example.
struct SingleProjection {
  int variable = 0;
  Eigen::Index prototype = 0;
  Eigen::Index sample_index = 0;
  double distance = 0.0;
  Eigen::VectorXd series;  // that sample's variable-k series
};

/// Per-variable block summary of one multivariable prototype.
struct BlockSummary {
  int variable = 0;
  Eigen::Index argmax_prototype = 0;  // index within the block
  double value = 0.0;                 // the block maximum
  Eigen::Index projected_sample = 0;  // projection of that single prototype
  double projection_distance = 0.0;
};

struct MultiPrototypeReport {
  Eigen::Index prototype = 0;
  Eigen::VectorXd vector;  // full row of the multivariable prototype matrix
  std::vector<BlockSummary> blocks;
  int dominant_class = 0;
};

struct InterpretationReport {
  std::vector<SingleProjection> single;      // d * n_k entries
  std::vector<Eigen::Index> block_starts;    // block layout of the m-space
  std::vector<MultiPrototypeReport> multi;   // n_M entries
};

/// Projects every single-variable prototype onto the training set (argmin
/// distance, ties to the lowest sample index). Stages 1-2 required.
InterpretationReport project_prototypes(const Model& model, const Dataset& train);

/// Adds the multivariable part: the prototype matrix with block boundaries,
/// per-block argmax prototypes with their projections, and the class each
/// prototype most strongly predicts. Stage 3 required.
InterpretationReport multivariable_report(const Model& model, const Dataset& train);

/// Class predicted by the final head when fed a similarity vector that is
/// maximal (1/eps) at `prototype` and zero elsewhere.
int dominant_class(const Model& model, Eigen::Index prototype);

/// Writes one CSV per variable: sample_index, label, then the encoding
/// coordinates; values are exactly the encode() outputs.
void export_encodings(const Model& model, const Dataset& data,
                      const std::filesystem::path& directory);

std::string report_to_json(const InterpretationReport& report, const Model& model);

}  // namespace mvproto
