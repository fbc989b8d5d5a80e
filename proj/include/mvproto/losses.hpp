#pragma once

#include <span>

#include "mvproto/prototype.hpp"
#include "mvproto/tensor.hpp"

namespace mvproto {

struct RegularizerWeights {
  double diversity = 0.01;
  double similarity = 0.01;
  double coverage = 0.01;
  double contrastive_margin = 1.0;
};

/// Additive constant inside the diversity logarithm.
inline constexpr double kDiversityDelta = 1e-6;
/// Ceiling applied to the diversity loss at prototype coincidence.
inline constexpr double kDiversityCeiling = 1e6;

/// Diversity penalty 1/log(1 + dbar + delta) clamped to kDiversityCeiling,
/// where dbar is the mean over prototypes j < m-1 of the distance to the
/// nearest later prototype. Large when prototypes cluster.
TensorPtr diversity_loss(const TensorPtr& prototypes);

/// Sum over prototypes of the distance to the nearest encoding.
TensorPtr similarity_loss(const TensorPtr& prototypes, const TensorPtr& encodings);

/// Sum over encodings of the distance to the nearest prototype.
TensorPtr coverage_loss(const TensorPtr& prototypes, const TensorPtr& encodings);

/// Margin contrastive loss on one pair of rank-1 encodings;
/// dissimilar = 0 pulls, dissimilar = 1 pushes beyond the margin.
TensorPtr contrastive_loss(const TensorPtr& enc_a, const TensorPtr& enc_b, int dissimilar,
                           double margin);

/// Mean contrastive loss over a batch of row-aligned encodings.
TensorPtr contrastive_loss_batch(const TensorPtr& enc_a, const TensorPtr& enc_b,
                                 std::span<const int> dissimilar, double margin);

/// ce + sum over layers of the weighted regularizers, each layer paired with
/// the batch encodings it matches against. Zero-weight terms are skipped, so
/// with all weights zero the result is the cross-entropy tensor itself.
/// Diversity is vacuous (skipped) for single-prototype layers.
TensorPtr total_stage_loss(const TensorPtr& cross_entropy, const RegularizerWeights& weights,
                           std::span<const PrototypeLayer* const> layers,
                           std::span<const TensorPtr> encodings_per_layer);

}  // namespace mvproto
