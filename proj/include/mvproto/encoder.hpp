#pragma once

#include <cstdint>
#include <vector>

#include "mvproto/dataset.hpp"
#include "mvproto/tensor.hpp"

namespace mvproto {

/// Single-layer gated recurrent cell over one scalar input per timestep;
/// the encoding of a series is the final hidden state. The cell follows the
/// original LSTM with an additive state path and input/output gates; packed
/// gate layout is [input, candidate, output], each of width `hidden`.
struct EncoderParams {
  int variable = 0;
  Eigen::Index hidden = 32;
  TensorPtr input_weights;   // {1, 3*hidden}
  TensorPtr hidden_weights;  // {hidden, 3*hidden}
  TensorPtr bias;            // {3*hidden}

  std::vector<TensorPtr> parameters() const { return {input_weights, hidden_weights, bias}; }
};

/// Weights uniform in [-s, s] with s = 1/sqrt(hidden); deterministic in seed.
EncoderParams init_encoder(int variable, Eigen::Index hidden, std::uint64_t seed);

/// Encodes a batch of series (rows) -> {batch, hidden}; differentiable.
TensorPtr encode_batch(const EncoderParams& params, const Eigen::Ref<const RowMatrixXd>& series);

/// Encodes one series -> {hidden}.
TensorPtr encode(const EncoderParams& params, const Eigen::Ref<const Eigen::VectorXd>& series);

/// Encodings of every sample's variable `variable`, one row per sample.
/// Runs sample-by-sample with recording disabled, so rows are bitwise equal
/// to encode() outputs.
RowMatrixXd encode_all(const EncoderParams& params, const Dataset& data, int variable);

}  // namespace mvproto
