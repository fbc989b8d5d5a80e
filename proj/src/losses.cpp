#include "mvproto/losses.hpp"

#include <string>

#include "mvproto/errors.hpp"

namespace mvproto {

TensorPtr diversity_loss(const TensorPtr& prototypes) {
  if (prototypes->rank() != 2 || prototypes->rows() < 2)
    throw ContractError("diversity_loss: need at least two prototypes");
  auto distances = pairwise_distance(prototypes, prototypes);
  auto nearest_later = row_min_upper(distances);
  auto dbar = mean(nearest_later);
  return clamp_max(reciprocal(log(add_scalar(dbar, 1.0 + kDiversityDelta))), kDiversityCeiling);
}

TensorPtr similarity_loss(const TensorPtr& prototypes, const TensorPtr& encodings) {
  if (encodings->rank() != 2 || encodings->rows() < 1)
    throw ContractError("similarity_loss: empty encodings");
  return sum(row_min(pairwise_distance(prototypes, encodings)));
}

TensorPtr coverage_loss(const TensorPtr& prototypes, const TensorPtr& encodings) {
  if (prototypes->rank() != 2 || prototypes->rows() < 1)
    throw ContractError("coverage_loss: empty prototypes");
  return sum(row_min(pairwise_distance(encodings, prototypes)));
}

TensorPtr contrastive_loss(const TensorPtr& enc_a, const TensorPtr& enc_b, int dissimilar,
                           double margin) {
  if (margin <= 0.0) throw ConfigError("contrastive_loss: margin must be positive");
  if (dissimilar != 0 && dissimilar != 1)
    throw ContractError("contrastive_loss: dissimilar flag must be 0 or 1");
  auto distance = euclidean_distance(enc_a, enc_b);
  if (dissimilar == 0) return scale(square(distance), 0.5);
  return scale(square(relu(add_scalar(neg(distance), margin))), 0.5);
}

TensorPtr contrastive_loss_batch(const TensorPtr& enc_a, const TensorPtr& enc_b,
                                 std::span<const int> dissimilar, double margin) {
  if (margin <= 0.0) throw ConfigError("contrastive_loss: margin must be positive");
  const Eigen::Index batch = enc_a->rows();
  if (static_cast<Eigen::Index>(dissimilar.size()) != batch)
    throw DimensionError("contrastive_loss_batch: flag count " +
                         std::to_string(dissimilar.size()) + " does not match batch " +
                         std::to_string(batch));
  Eigen::ArrayXd pull_mask(batch), push_mask(batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const int flag = dissimilar[static_cast<std::size_t>(i)];
    if (flag != 0 && flag != 1)
      throw ContractError("contrastive_loss: dissimilar flag must be 0 or 1");
    pull_mask[i] = flag == 0 ? 1.0 : 0.0;
    push_mask[i] = 1.0 - pull_mask[i];
  }
  auto distance = row_distance(enc_a, enc_b);
  auto pull = mul(square(distance), Tensor::from_array({batch}, std::move(pull_mask)));
  auto push = mul(square(relu(add_scalar(neg(distance), margin))),
                  Tensor::from_array({batch}, std::move(push_mask)));
  return scale(mean(add(pull, push)), 0.5);
}

TensorPtr total_stage_loss(const TensorPtr& cross_entropy, const RegularizerWeights& weights,
                           std::span<const PrototypeLayer* const> layers,
                           std::span<const TensorPtr> encodings_per_layer) {
  if (layers.size() != encodings_per_layer.size())
    throw ContractError("total_stage_loss: layer and encoding counts disagree");
  TensorPtr total = cross_entropy;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const TensorPtr& prototypes = layers[i]->prototypes;
    const TensorPtr& encodings = encodings_per_layer[i];
    if (weights.diversity > 0.0 && layers[i]->count() >= 2)
      total = add(total, scale(diversity_loss(prototypes), weights.diversity));
    if (weights.similarity > 0.0)
      total = add(total, scale(similarity_loss(prototypes, encodings), weights.similarity));
    if (weights.coverage > 0.0)
      total = add(total, scale(coverage_loss(prototypes, encodings), weights.coverage));
  }
  return total;
}

}  // namespace mvproto
