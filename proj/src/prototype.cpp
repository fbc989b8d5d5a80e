#include "mvproto/prototype.hpp"

#include <numeric>
#include <string>

#include "mvproto/errors.hpp"
#include "mvproto/random.hpp"

namespace mvproto {

TensorPtr similarity(const TensorPtr& a, const TensorPtr& b) {
  return reciprocal(add_scalar(euclidean_distance(a, b), kSimilarityEpsilon));
}

TensorPtr match(const PrototypeLayer& layer, const TensorPtr& input) {
  if (input->rank() != 1 || input->size() != layer.dim())
    throw DimensionError("match: input " + input->shape_string() + " does not fit layer dim " +
                         std::to_string(layer.dim()));
  auto distances = pairwise_distance(as_row(input), layer.prototypes);
  return reciprocal(add_scalar(flatten(distances), kSimilarityEpsilon));
}

TensorPtr match_batch(const PrototypeLayer& layer, const TensorPtr& inputs) {
  if (inputs->rank() != 2 || inputs->cols() != layer.dim())
    throw DimensionError("match_batch: inputs " + inputs->shape_string() +
                         " do not fit layer dim " + std::to_string(layer.dim()));
  return reciprocal(add_scalar(pairwise_distance(inputs, layer.prototypes), kSimilarityEpsilon));
}

MultivariableRepresentation build_multivariable(const std::vector<TensorPtr>& per_variable) {
  if (per_variable.empty()) throw ContractError("build_multivariable: no variables");
  MultivariableRepresentation rep;
  Eigen::Index offset = 0;
  for (const auto& block : per_variable) {
    rep.block_starts.push_back(offset);
    offset += block->size();
  }
  rep.values = concat(per_variable);
  return rep;
}

MultivariableRepresentation build_multivariable_batch(const std::vector<TensorPtr>& per_variable) {
  if (per_variable.empty()) throw ContractError("build_multivariable: no variables");
  MultivariableRepresentation rep;
  Eigen::Index offset = 0;
  for (const auto& block : per_variable) {
    rep.block_starts.push_back(offset);
    offset += block->cols();
  }
  rep.values = concat_cols(per_variable);
  return rep;
}

PrototypeLayer init_prototypes(PrototypeLevel level, Eigen::Index count,
                               const Eigen::Ref<const RowMatrixXd>& encoded, std::uint64_t seed,
                               int variable) {
  if (count < 1) throw ConfigError("init_prototypes: count must be positive");
  if (count > encoded.rows())
    throw ConfigError("init_prototypes: requested " + std::to_string(count) +
                      " prototypes from " + std::to_string(encoded.rows()) + " training vectors");

  // Partial Fisher-Yates for `count` distinct row indices.
  std::vector<Eigen::Index> indices(static_cast<std::size_t>(encoded.rows()));
  std::iota(indices.begin(), indices.end(), 0);
  Rng rng = make_rng(seed, {0x50524f544fULL, static_cast<std::uint64_t>(variable + 1)});
  for (Eigen::Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, encoded.rows() - 1);
    std::swap(indices[static_cast<std::size_t>(i)], indices[static_cast<std::size_t>(pick(rng))]);
  }

  RowMatrixXd initial(count, encoded.cols());
  for (Eigen::Index i = 0; i < count; ++i)
    initial.row(i) = encoded.row(indices[static_cast<std::size_t>(i)]);

  PrototypeLayer layer;
  layer.level = level;
  layer.variable = variable;
  layer.prototypes = Tensor::from_matrix(initial, true);
  return layer;
}

}  // namespace mvproto
