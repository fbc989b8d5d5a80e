#pragma once

#include <cstdint>
#include <vector>

#include "mvproto/tensor.hpp"

namespace mvproto {

/// Smoothing added to the distance before inversion; caps similarity at 1e4
/// where the raw 1/distance map would be singular.
inline constexpr double kSimilarityEpsilon = 1e-4;

enum class PrototypeLevel { kSingleVariable, kMultivariable };

/// A learned matrix of prototype vectors; rows are prototypes.
struct PrototypeLayer {
  PrototypeLevel level = PrototypeLevel::kSingleVariable;
  int variable = -1;  // owning variable, single level only
  TensorPtr prototypes;  // {count, dim}

  Eigen::Index count() const { return prototypes ? prototypes->rows() : 0; }
  Eigen::Index dim() const { return prototypes ? prototypes->cols() : 0; }
};

/// sim(a, b) = 1 / (eps + ||a - b||); strictly positive, strictly decreasing
/// in distance, differentiable everywhere.
TensorPtr similarity(const TensorPtr& a, const TensorPtr& b);

/// Similarity of `input` {dim} against every prototype, in prototype order.
TensorPtr match(const PrototypeLayer& layer, const TensorPtr& input);

/// Batched match: inputs {batch, dim} -> {batch, count}.
TensorPtr match_batch(const PrototypeLayer& layer, const TensorPtr& inputs);

/// Concatenated single-variable similarity vectors with their block layout.
struct MultivariableRepresentation {
  TensorPtr values;  // {sum of block widths} or {batch, sum} for the batched form
  std::vector<Eigen::Index> block_starts;
};

MultivariableRepresentation build_multivariable(const std::vector<TensorPtr>& per_variable);
MultivariableRepresentation build_multivariable_batch(const std::vector<TensorPtr>& per_variable);

/// Prototypes initialized at a seeded sample of distinct encoded training
/// vectors (rows of `encoded`).
PrototypeLayer init_prototypes(PrototypeLevel level, Eigen::Index count,
                               const Eigen::Ref<const RowMatrixXd>& encoded, std::uint64_t seed,
                               int variable = -1);

}  // namespace mvproto
