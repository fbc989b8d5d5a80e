#include "mvproto/encoder.hpp"

#include <cmath>

#include "mvproto/errors.hpp"
#include "mvproto/random.hpp"

namespace mvproto {

namespace {

/// One fused timestep of the gated cell, recorded as a single tape node.
/// `state` packs [h | c] side by side ({batch, 2*hidden}). The cell keeps
/// the additive state update of the original LSTM (no forget gate):
///
///   c_t = c_{t-1} + i_t * g_t,   h_t = o_t * tanh(c_t)
///
/// The identity carry gives gradients an unattenuated path through long
/// series, which the uniform [-s, s] weight initialization otherwise lacks
/// (multiplicative forget gates start near 0.5 and silence early
/// timesteps). The node caches the gate activations for the analytic
/// backward pass.
TensorPtr lstm_cell(const TensorPtr& x, const TensorPtr& state, const EncoderParams& p) {
  const Eigen::Index batch = state->rows();
  const Eigen::Index hidden = p.hidden;

  const auto h_prev = state->matrix().leftCols(hidden);
  const auto c_prev = state->matrix().rightCols(hidden);

  RowMatrixXd z(batch, 3 * hidden);
  z.noalias() = x->matrix() * p.input_weights->matrix();
  z.noalias() += h_prev * p.hidden_weights->matrix();
  z.rowwise() += p.bias->vector().transpose();

  RowMatrixXd input_gate = (1.0 + (-z.leftCols(hidden).array()).exp()).inverse();
  RowMatrixXd candidate = z.middleCols(hidden, hidden).array().tanh();
  RowMatrixXd output_gate = (1.0 + (-z.rightCols(hidden).array()).exp()).inverse();

  Eigen::ArrayXd flat(batch * 2 * hidden);
  Eigen::Map<RowMatrixXd> next(flat.data(), batch, 2 * hidden);
  next.rightCols(hidden) = (c_prev.array() + input_gate.array() * candidate.array()).matrix();
  RowMatrixXd tanh_c = next.rightCols(hidden).array().tanh();
  next.leftCols(hidden) = (output_gate.array() * tanh_c.array()).matrix();

  auto out = Tensor::from_array({batch, 2 * hidden}, std::move(flat));
  if (!grad_enabled() ||
      !(state->requires_grad() || p.input_weights->requires_grad() ||
        p.hidden_weights->requires_grad() || p.bias->requires_grad()))
    return out;

  out->enable_grad();
  Tape::active().record(
      {x, state, p.input_weights, p.hidden_weights, p.bias}, out,
      [x, state, wx = p.input_weights, wh = p.hidden_weights, bias = p.bias, out, hidden,
       input_gate = std::move(input_gate), candidate = std::move(candidate),
       output_gate = std::move(output_gate), tanh_c = std::move(tanh_c)] {
        const Eigen::Index batch = state->rows();
        const auto g_out = out->grad_matrix();
        const auto gh = g_out.leftCols(hidden).array();
        const auto gc_out = g_out.rightCols(hidden).array();

        const Eigen::ArrayXXd gc =
            gc_out + gh * output_gate.array() * (1.0 - tanh_c.array().square());
        RowMatrixXd gz(batch, 3 * hidden);
        gz.leftCols(hidden) =
            (gc * candidate.array() * input_gate.array() * (1.0 - input_gate.array())).matrix();
        gz.middleCols(hidden, hidden) =
            (gc * input_gate.array() * (1.0 - candidate.array().square())).matrix();
        gz.rightCols(hidden) =
            (gh * tanh_c.array() * output_gate.array() * (1.0 - output_gate.array())).matrix();

        if (state->requires_grad()) {
          auto g_state = state->grad_matrix();
          g_state.leftCols(hidden).noalias() += gz * wh->matrix().transpose();
          g_state.rightCols(hidden) += gc.matrix();  // identity carry
        }
        if (x->requires_grad()) x->grad_matrix().noalias() += gz * wx->matrix().transpose();
        if (wx->requires_grad())
          wx->grad_matrix().noalias() += x->matrix().transpose() * gz;
        if (wh->requires_grad())
          wh->grad_matrix().noalias() += state->matrix().leftCols(hidden).transpose() * gz;
        if (bias->requires_grad()) {
          Eigen::VectorXd col_sums = gz.colwise().sum().transpose();
          bias->grad() += col_sums.array();
        }
      });
  return out;
}

}  // namespace

EncoderParams init_encoder(int variable, Eigen::Index hidden, std::uint64_t seed) {
  if (hidden < 1) throw ConfigError("init_encoder: hidden size must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  Rng rng = make_rng(seed, {0x454e43ULL, static_cast<std::uint64_t>(variable)});
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto fill = [&](std::vector<Eigen::Index> shape) {
    Eigen::Index n = 1;
    for (auto e : shape) n *= e;
    Eigen::ArrayXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
    return Tensor::from_array(std::move(shape), std::move(v), true);
  };
  EncoderParams params;
  params.variable = variable;
  params.hidden = hidden;
  params.input_weights = fill({1, 3 * hidden});
  params.hidden_weights = fill({hidden, 3 * hidden});
  params.bias = fill({3 * hidden});
  return params;
}

TensorPtr encode_batch(const EncoderParams& params, const Eigen::Ref<const RowMatrixXd>& series) {
  const Eigen::Index batch = series.rows();
  const Eigen::Index steps = series.cols();
  const Eigen::Index hidden = params.hidden;
  if (batch < 1 || steps < 1) throw ContractError("encode: empty series");
  if (!series.allFinite()) throw ContractError("encode: series contains non-finite values");

  TensorPtr state = Tensor::zeros({batch, 2 * hidden});
  for (Eigen::Index t = 0; t < steps; ++t)
    state = lstm_cell(Tensor::from_matrix(series.col(t)), state, params);
  return slice_cols(state, 0, hidden);
}

TensorPtr encode(const EncoderParams& params, const Eigen::Ref<const Eigen::VectorXd>& series) {
  return flatten(encode_batch(params, series.transpose()));
}

RowMatrixXd encode_all(const EncoderParams& params, const Dataset& data, int variable) {
  NoGradGuard no_grad;
  RowMatrixXd out(data.size(), params.hidden);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    auto e = encode(params, data.sample(i).variables[static_cast<std::size_t>(variable)]);
    out.row(i) = e->vector().transpose();
  }
  return out;
}

}  // namespace mvproto
