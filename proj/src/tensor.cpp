#include "mvproto/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

#include "mvproto/errors.hpp"

namespace mvproto {

namespace {

thread_local bool g_grad_enabled = true;

Eigen::Index shape_product(const std::vector<Eigen::Index>& shape) {
  Eigen::Index n = 1;
  for (Eigen::Index e : shape) n *= e;
  return n;
}

std::string shape_str(const std::vector<Eigen::Index>& shape) {
  if (shape.empty()) return "[scalar]";
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void require_rank2(const TensorPtr& t, const char* op) {
  if (t->rank() != 2)
    throw DimensionError(std::string(op) + ": expected a rank-2 tensor, got " + t->shape_string());
}

void require_rank1(const TensorPtr& t, const char* op) {
  if (t->rank() != 1)
    throw DimensionError(std::string(op) + ": expected a rank-1 tensor, got " + t->shape_string());
}

/// Registers the node when recording applies; output inherits requires_grad.
void track(std::vector<TensorPtr> inputs, const TensorPtr& output, std::function<void()> pull) {
  bool any = false;
  for (const auto& in : inputs) any = any || in->requires_grad();
  if (!any || !g_grad_enabled) return;
  output->enable_grad();
  Tape::active().record(std::move(inputs), output, std::move(pull));
}

}  // namespace

Tensor::Tensor(std::vector<Eigen::Index> shape, Eigen::ArrayXd values, bool requires_grad)
    : shape_(std::move(shape)), values_(std::move(values)), requires_grad_(requires_grad) {
  for (Eigen::Index e : shape_) {
    if (e < 0) throw DimensionError("tensor extents must be nonnegative, got " + shape_string());
  }
  if (values_.size() != shape_product(shape_))
    throw DimensionError("value count " + std::to_string(values_.size()) +
                         " does not match shape " + shape_string());
  if (requires_grad_) grad_ = Eigen::ArrayXd::Zero(values_.size());
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
  Eigen::ArrayXd v(1);
  v[0] = value;
  return std::make_shared<Tensor>(std::vector<Eigen::Index>{}, std::move(v), requires_grad);
}

TensorPtr Tensor::from_vector(Eigen::VectorXd values, bool requires_grad) {
  std::vector<Eigen::Index> shape{values.size()};
  return std::make_shared<Tensor>(std::move(shape), Eigen::ArrayXd(std::move(values)),
                                  requires_grad);
}

TensorPtr Tensor::from_matrix(const Eigen::Ref<const RowMatrixXd>& values, bool requires_grad) {
  std::vector<Eigen::Index> shape{values.rows(), values.cols()};
  Eigen::ArrayXd flat(values.size());
  Eigen::Map<RowMatrixXd>(flat.data(), values.rows(), values.cols()) = values;
  return std::make_shared<Tensor>(std::move(shape), std::move(flat), requires_grad);
}

TensorPtr Tensor::from_array(std::vector<Eigen::Index> shape, Eigen::ArrayXd values,
                             bool requires_grad) {
  return std::make_shared<Tensor>(std::move(shape), std::move(values), requires_grad);
}

TensorPtr Tensor::zeros(std::vector<Eigen::Index> shape, bool requires_grad) {
  Eigen::ArrayXd v = Eigen::ArrayXd::Zero(shape_product(shape));
  return std::make_shared<Tensor>(std::move(shape), std::move(v), requires_grad);
}

Eigen::Index Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows(): tensor is " + shape_string());
  return shape_[0];
}

Eigen::Index Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols(): tensor is " + shape_string());
  return shape_[1];
}

std::string Tensor::shape_string() const { return shape_str(shape_); }

double Tensor::value() const {
  if (size() != 1) throw ContractError("value(): tensor " + shape_string() + " is not a scalar");
  return values_[0];
}

void Tensor::enable_grad() {
  if (requires_grad_) return;
  requires_grad_ = true;
  grad_ = Eigen::ArrayXd::Zero(values_.size());
}

Eigen::ArrayXd& Tensor::grad() {
  if (!requires_grad_) throw ContractError("grad(): tensor does not require gradients");
  return grad_;
}

const Eigen::ArrayXd& Tensor::grad() const {
  if (!requires_grad_) throw ContractError("grad(): tensor does not require gradients");
  return grad_;
}

void Tensor::zero_grad() {
  if (requires_grad_) grad_.setZero();
}

Eigen::Map<const RowMatrixXd> Tensor::matrix() const {
  if (rank() != 2) throw DimensionError("matrix(): tensor is " + shape_string());
  return {values_.data(), shape_[0], shape_[1]};
}

Eigen::Map<RowMatrixXd> Tensor::matrix() {
  if (rank() != 2) throw DimensionError("matrix(): tensor is " + shape_string());
  return {values_.data(), shape_[0], shape_[1]};
}

Eigen::Map<RowMatrixXd> Tensor::grad_matrix() {
  if (rank() != 2) throw DimensionError("grad_matrix(): tensor is " + shape_string());
  return {grad().data(), shape_[0], shape_[1]};
}

Eigen::Map<const RowMatrixXd> Tensor::grad_matrix() const {
  if (rank() != 2) throw DimensionError("grad_matrix(): tensor is " + shape_string());
  return {grad().data(), shape_[0], shape_[1]};
}

Eigen::Map<const Eigen::VectorXd> Tensor::vector() const {
  if (rank() != 1) throw DimensionError("vector(): tensor is " + shape_string());
  return {values_.data(), values_.size()};
}

void Tape::record(std::vector<TensorPtr> inputs, TensorPtr output, std::function<void()> pull) {
  nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(pull)});
}

void Tape::backward(const TensorPtr& root) {
  if (!root || root->size() != 1)
    throw ContractError("backward: root must be a scalar tensor");
  bool produced_here = false;
  for (const auto& node : nodes_) {
    if (node.output == root) {
      produced_here = true;
      break;
    }
  }
  if (!produced_here)
    throw ContractError("backward: root was not produced on the active tape");
  // Intermediate gradients restart from zero on every sweep; leaves keep
  // their accumulated values.
  for (auto& node : nodes_) node.output->zero_grad();
  root->grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->pull();
}

void Tape::clear() { nodes_.clear(); }

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const TensorPtr& root) { Tape::active().backward(root); }

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a->cols() != b->rows())
    throw DimensionError("matmul: inner dimensions disagree: " + a->shape_string() + " vs " +
                         b->shape_string());
  Eigen::ArrayXd flat(a->rows() * b->cols());
  Eigen::Map<RowMatrixXd>(flat.data(), a->rows(), b->cols()).noalias() = a->matrix() * b->matrix();
  auto out = Tensor::from_array({a->rows(), b->cols()}, std::move(flat));
  track({a, b}, out, [a, b, out] {
    auto g = out->grad_matrix();
    if (a->requires_grad()) a->grad_matrix().noalias() += g * b->matrix().transpose();
    if (b->requires_grad()) b->grad_matrix().noalias() += a->matrix().transpose() * g;
  });
  return out;
}

namespace {

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

Broadcast binary_broadcast(const TensorPtr& a, const TensorPtr& b, const char* op) {
  if (a->shape() == b->shape()) return Broadcast::kNone;
  if (a->is_scalar()) return Broadcast::kLeftScalar;
  if (b->is_scalar()) return Broadcast::kRightScalar;
  throw DimensionError(std::string(op) + ": shape mismatch: " + a->shape_string() + " vs " +
                       b->shape_string());
}

}  // namespace

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  Broadcast bc = binary_broadcast(a, b, "add");
  Eigen::ArrayXd v = bc == Broadcast::kLeftScalar    ? (a->value() + b->values()).eval()
                     : bc == Broadcast::kRightScalar ? (a->values() + b->value()).eval()
                                                     : (a->values() + b->values()).eval();
  auto out = Tensor::from_array(bc == Broadcast::kLeftScalar ? b->shape() : a->shape(),
                                std::move(v));
  track({a, b}, out, [a, b, out] {
    const Eigen::ArrayXd& g = out->grad();
    if (a->requires_grad()) {
      if (a->size() == g.size()) a->grad() += g;
      else a->grad()[0] += g.sum();
    }
    if (b->requires_grad()) {
      if (b->size() == g.size()) b->grad() += g;
      else b->grad()[0] += g.sum();
    }
  });
  return out;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
  Broadcast bc = binary_broadcast(a, b, "sub");
  Eigen::ArrayXd v = bc == Broadcast::kLeftScalar    ? (a->value() - b->values()).eval()
                     : bc == Broadcast::kRightScalar ? (a->values() - b->value()).eval()
                                                     : (a->values() - b->values()).eval();
  auto out = Tensor::from_array(bc == Broadcast::kLeftScalar ? b->shape() : a->shape(),
                                std::move(v));
  track({a, b}, out, [a, b, out] {
    const Eigen::ArrayXd& g = out->grad();
    if (a->requires_grad()) {
      if (a->size() == g.size()) a->grad() += g;
      else a->grad()[0] += g.sum();
    }
    if (b->requires_grad()) {
      if (b->size() == g.size()) b->grad() -= g;
      else b->grad()[0] -= g.sum();
    }
  });
  return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  Broadcast bc = binary_broadcast(a, b, "mul");
  Eigen::ArrayXd v = bc == Broadcast::kLeftScalar    ? (a->value() * b->values()).eval()
                     : bc == Broadcast::kRightScalar ? (a->values() * b->value()).eval()
                                                     : (a->values() * b->values()).eval();
  auto out = Tensor::from_array(bc == Broadcast::kLeftScalar ? b->shape() : a->shape(),
                                std::move(v));
  track({a, b}, out, [a, b, out] {
    const Eigen::ArrayXd& g = out->grad();
    if (a->requires_grad()) {
      if (a->size() == g.size()) {
        if (b->size() == g.size()) a->grad() += g * b->values();
        else a->grad() += g * b->value();
      } else {
        a->grad()[0] += (g * b->values()).sum();
      }
    }
    if (b->requires_grad()) {
      if (b->size() == g.size()) {
        if (a->size() == g.size()) b->grad() += g * a->values();
        else b->grad() += g * a->value();
      } else {
        b->grad()[0] += (g * a->values()).sum();
      }
    }
  });
  return out;
}

TensorPtr tanh(const TensorPtr& x) {
  auto out = Tensor::from_array(x->shape(), x->values().tanh());
  track({x}, out, [x, out] {
    if (x->requires_grad()) x->grad() += out->grad() * (1.0 - out->values().square());
  });
  return out;
}

TensorPtr sigmoid(const TensorPtr& x) {
  // 0.5*(1+tanh(x/2)) avoids overflow on both tails.
  auto out = Tensor::from_array(x->shape(), 0.5 * (1.0 + (0.5 * x->values()).tanh()));
  track({x}, out, [x, out] {
    if (x->requires_grad())
      x->grad() += out->grad() * out->values() * (1.0 - out->values());
  });
  return out;
}

TensorPtr relu(const TensorPtr& x) {
  auto out = Tensor::from_array(x->shape(), x->values().max(0.0));
  track({x}, out, [x, out] {
    if (x->requires_grad())
      x->grad() += out->grad() * (x->values() > 0.0).cast<double>();
  });
  return out;
}

TensorPtr square(const TensorPtr& x) {
  auto out = Tensor::from_array(x->shape(), x->values().square());
  track({x}, out, [x, out] {
    if (x->requires_grad()) x->grad() += out->grad() * 2.0 * x->values();
  });
  return out;
}

TensorPtr sqrt(const TensorPtr& x) {
  auto out = Tensor::from_array(x->shape(), x->values().sqrt());
  track({x}, out, [x, out] {
    if (x->requires_grad()) x->grad() += out->grad() * 0.5 / out->values();
  });
  return out;
}

TensorPtr reciprocal(const TensorPtr& x) {
  auto out = Tensor::from_array(x->shape(), x->values().inverse());
  track({x}, out, [x, out] {
    if (x->requires_grad()) x->grad() -= out->grad() * out->values().square();
  });
  return out;
}

TensorPtr log(const TensorPtr& x) {
  auto out = Tensor::from_array(x->shape(), x->values().log());
  track({x}, out, [x, out] {
    if (x->requires_grad()) x->grad() += out->grad() / x->values();
  });
  return out;
}

TensorPtr neg(const TensorPtr& x) { return scale(x, -1.0); }

TensorPtr scale(const TensorPtr& x, double factor) {
  auto out = Tensor::from_array(x->shape(), factor * x->values());
  track({x}, out, [x, out, factor] {
    if (x->requires_grad()) x->grad() += factor * out->grad();
  });
  return out;
}

TensorPtr add_scalar(const TensorPtr& x, double offset) {
  auto out = Tensor::from_array(x->shape(), x->values() + offset);
  track({x}, out, [x, out] {
    if (x->requires_grad()) x->grad() += out->grad();
  });
  return out;
}

TensorPtr clamp_max(const TensorPtr& x, double ceiling) {
  auto out = Tensor::from_array(x->shape(), x->values().min(ceiling));
  track({x}, out, [x, out, ceiling] {
    if (x->requires_grad())
      x->grad() += out->grad() * (x->values() <= ceiling).cast<double>();
  });
  return out;
}

TensorPtr sum(const TensorPtr& x) {
  auto out = Tensor::scalar(x->values().sum());
  track({x}, out, [x, out] {
    if (x->requires_grad()) x->grad() += out->grad()[0];
  });
  return out;
}

TensorPtr mean(const TensorPtr& x) {
  if (x->size() == 0) throw ContractError("mean: empty tensor");
  auto out = Tensor::scalar(x->values().mean());
  const double inv = 1.0 / static_cast<double>(x->size());
  track({x}, out, [x, out, inv] {
    if (x->requires_grad()) x->grad() += inv * out->grad()[0];
  });
  return out;
}

TensorPtr row_min(const TensorPtr& x) {
  require_rank2(x, "row_min");
  if (x->cols() == 0) throw ContractError("row_min: zero-column input");
  const auto m = x->matrix();
  Eigen::ArrayXd v(x->rows());
  std::vector<Eigen::Index> argmin(static_cast<std::size_t>(x->rows()));
  for (Eigen::Index i = 0; i < x->rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < x->cols(); ++j)
      if (m(i, j) < m(i, best)) best = j;  // ties keep the lowest index
    argmin[static_cast<std::size_t>(i)] = best;
    v[i] = m(i, best);
  }
  auto out = Tensor::from_array({x->rows()}, std::move(v));
  track({x}, out, [x, out, argmin = std::move(argmin)] {
    if (!x->requires_grad()) return;
    auto gx = x->grad_matrix();
    const Eigen::ArrayXd& g = out->grad();
    for (Eigen::Index i = 0; i < x->rows(); ++i)
      gx(i, argmin[static_cast<std::size_t>(i)]) += g[i];
  });
  return out;
}

TensorPtr row_min_upper(const TensorPtr& x) {
  require_rank2(x, "row_min_upper");
  if (x->rows() != x->cols() || x->rows() < 2)
    throw ContractError("row_min_upper: need a square input with at least two rows, got " +
                        x->shape_string());
  const auto m = x->matrix();
  const Eigen::Index n = x->rows();
  Eigen::ArrayXd v(n - 1);
  std::vector<Eigen::Index> argmin(static_cast<std::size_t>(n - 1));
  for (Eigen::Index j = 0; j + 1 < n; ++j) {
    Eigen::Index best = j + 1;
    for (Eigen::Index i = j + 2; i < n; ++i)
      if (m(j, i) < m(j, best)) best = i;
    argmin[static_cast<std::size_t>(j)] = best;
    v[j] = m(j, best);
  }
  auto out = Tensor::from_array({n - 1}, std::move(v));
  track({x}, out, [x, out, argmin = std::move(argmin)] {
    if (!x->requires_grad()) return;
    auto gx = x->grad_matrix();
    const Eigen::ArrayXd& g = out->grad();
    for (Eigen::Index j = 0; j < out->size(); ++j)
      gx(j, argmin[static_cast<std::size_t>(j)]) += g[j];
  });
  return out;
}

TensorPtr flatten(const TensorPtr& x) {
  auto out = Tensor::from_array({x->size()}, x->values());
  track({x}, out, [x, out] {
    if (x->requires_grad()) x->grad() += out->grad();
  });
  return out;
}

TensorPtr as_row(const TensorPtr& x) {
  require_rank1(x, "as_row");
  auto out = Tensor::from_array({1, x->size()}, x->values());
  track({x}, out, [x, out] {
    if (x->requires_grad()) x->grad() += out->grad();
  });
  return out;
}

TensorPtr slice_cols(const TensorPtr& x, Eigen::Index start, Eigen::Index count) {
  require_rank2(x, "slice_cols");
  if (start < 0 || count < 0 || start + count > x->cols())
    throw DimensionError("slice_cols: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") outside " + x->shape_string());
  Eigen::ArrayXd flat(x->rows() * count);
  Eigen::Map<RowMatrixXd>(flat.data(), x->rows(), count) =
      x->matrix().middleCols(start, count);
  auto out = Tensor::from_array({x->rows(), count}, std::move(flat));
  track({x}, out, [x, out, start, count] {
    if (x->requires_grad())
      x->grad_matrix().middleCols(start, count) += out->grad_matrix();
  });
  return out;
}

TensorPtr concat(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw ContractError("concat: empty input list");
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    require_rank1(p, "concat");
    total += p->size();
  }
  Eigen::ArrayXd v(total);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    v.segment(offset, p->size()) = p->values();
    offset += p->size();
  }
  auto out = Tensor::from_array({total}, std::move(v));
  std::vector<TensorPtr> inputs = parts;
  track(inputs, out, [parts, out] {
    Eigen::Index offset = 0;
    for (const auto& p : parts) {
      if (p->requires_grad()) p->grad() += out->grad().segment(offset, p->size());
      offset += p->size();
    }
  });
  return out;
}

TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: empty input list");
  const Eigen::Index rows = parts.front()->rank() == 2 ? parts.front()->rows() : -1;
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p->rows() != rows)
      throw DimensionError("concat_cols: row counts disagree: " + p->shape_string());
    total += p->cols();
  }
  Eigen::ArrayXd flat(rows * total);
  Eigen::Map<RowMatrixXd> view(flat.data(), rows, total);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    view.middleCols(offset, p->cols()) = p->matrix();
    offset += p->cols();
  }
  auto out = Tensor::from_array({rows, total}, std::move(flat));
  std::vector<TensorPtr> inputs = parts;
  track(inputs, out, [parts, out] {
    Eigen::Index offset = 0;
    for (const auto& p : parts) {
      if (p->requires_grad())
        p->grad_matrix() += out->grad_matrix().middleCols(offset, p->cols());
      offset += p->cols();
    }
  });
  return out;
}

TensorPtr add_bias(const TensorPtr& m, const TensorPtr& bias) {
  require_rank2(m, "add_bias");
  require_rank1(bias, "add_bias");
  if (bias->size() != m->cols())
    throw DimensionError("add_bias: bias length " + bias->shape_string() +
                         " does not match columns of " + m->shape_string());
  Eigen::ArrayXd flat(m->size());
  Eigen::Map<RowMatrixXd> view(flat.data(), m->rows(), m->cols());
  view = m->matrix();
  view.rowwise() += bias->vector().transpose();
  auto out = Tensor::from_array(m->shape(), std::move(flat));
  track({m, bias}, out, [m, bias, out] {
    if (m->requires_grad()) m->grad() += out->grad();
    if (bias->requires_grad()) {
      Eigen::VectorXd col_sums = out->grad_matrix().colwise().sum().transpose();
      bias->grad() += col_sums.array();
    }
  });
  return out;
}

TensorPtr euclidean_distance(const TensorPtr& a, const TensorPtr& b) {
  require_rank1(a, "euclidean_distance");
  require_rank1(b, "euclidean_distance");
  if (a->size() != b->size())
    throw DimensionError("euclidean_distance: lengths disagree: " + a->shape_string() + " vs " +
                         b->shape_string());
  const double d = std::sqrt((a->values() - b->values()).square().sum());
  auto out = Tensor::scalar(d);
  track({a, b}, out, [a, b, out] {
    const double d = out->values()[0];
    if (d == 0.0) return;  // zero subgradient at the kink
    const double g = out->grad()[0] / d;
    Eigen::ArrayXd diff = a->values() - b->values();
    if (a->requires_grad()) a->grad() += g * diff;
    if (b->requires_grad()) b->grad() -= g * diff;
  });
  return out;
}

TensorPtr row_distance(const TensorPtr& a, const TensorPtr& b) {
  require_rank2(a, "row_distance");
  require_rank2(b, "row_distance");
  if (a->shape() != b->shape())
    throw DimensionError("row_distance: shapes disagree: " + a->shape_string() + " vs " +
                         b->shape_string());
  const auto ma = a->matrix();
  const auto mb = b->matrix();
  Eigen::ArrayXd v(a->rows());
  for (Eigen::Index i = 0; i < a->rows(); ++i) v[i] = (ma.row(i) - mb.row(i)).norm();
  auto out = Tensor::from_array({a->rows()}, std::move(v));
  track({a, b}, out, [a, b, out] {
    const Eigen::ArrayXd& g = out->grad();
    const auto ma = a->matrix();
    const auto mb = b->matrix();
    for (Eigen::Index i = 0; i < a->rows(); ++i) {
      const double d = out->values()[i];
      if (d == 0.0 || g[i] == 0.0) continue;
      Eigen::RowVectorXd diff = (ma.row(i) - mb.row(i)) * (g[i] / d);
      if (a->requires_grad()) a->grad_matrix().row(i) += diff;
      if (b->requires_grad()) b->grad_matrix().row(i) -= diff;
    }
  });
  return out;
}

TensorPtr pairwise_distance(const TensorPtr& x, const TensorPtr& p) {
  require_rank2(x, "pairwise_distance");
  require_rank2(p, "pairwise_distance");
  if (x->cols() != p->cols())
    throw DimensionError("pairwise_distance: feature lengths disagree: " + x->shape_string() +
                         " vs " + p->shape_string());
  const auto mx = x->matrix();
  const auto mp = p->matrix();
  const Eigen::Index n = x->rows(), m = p->rows();
  Eigen::ArrayXd flat(n * m);
  Eigen::Map<RowMatrixXd> view(flat.data(), n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) view(i, j) = (mx.row(i) - mp.row(j)).norm();
  auto out = Tensor::from_array({n, m}, std::move(flat));
  track({x, p}, out, [x, p, out] {
    const auto mx = x->matrix();
    const auto mp = p->matrix();
    const auto d = out->matrix();
    const auto g = out->grad_matrix();
    for (Eigen::Index i = 0; i < x->rows(); ++i) {
      for (Eigen::Index j = 0; j < p->rows(); ++j) {
        if (d(i, j) == 0.0 || g(i, j) == 0.0) continue;
        Eigen::RowVectorXd diff = (mx.row(i) - mp.row(j)) * (g(i, j) / d(i, j));
        if (x->requires_grad()) x->grad_matrix().row(i) += diff;
        if (p->requires_grad()) p->grad_matrix().row(j) -= diff;
      }
    }
  });
  return out;
}

TensorPtr softmax_cross_entropy(const TensorPtr& logits, std::span<const int> labels) {
  require_rank2(logits, "softmax_cross_entropy");
  const Eigen::Index batch = logits->rows(), classes = logits->cols();
  if (static_cast<Eigen::Index>(labels.size()) != batch)
    throw DimensionError("softmax_cross_entropy: got " + std::to_string(labels.size()) +
                         " labels for " + logits->shape_string());
  for (int label : labels) {
    if (label < 0 || label >= classes)
      throw IndexError("softmax_cross_entropy: label " + std::to_string(label) +
                       " outside [0, " + std::to_string(classes) + ")");
  }
  const auto lm = logits->matrix();
  RowMatrixXd softmax(batch, classes);
  double total = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const double peak = lm.row(i).maxCoeff();
    Eigen::ArrayXd shifted = lm.row(i).array() - peak;
    Eigen::ArrayXd exps = shifted.exp();
    const double z = exps.sum();
    softmax.row(i) = (exps / z).matrix();
    total += std::log(z) - shifted[labels[static_cast<std::size_t>(i)]];
  }
  auto out = Tensor::scalar(total / static_cast<double>(batch));
  std::vector<int> owned(labels.begin(), labels.end());
  track({logits}, out,
        [logits, out, softmax = std::move(softmax), owned = std::move(owned)] {
          if (!logits->requires_grad()) return;
          const double g = out->grad()[0] / static_cast<double>(logits->rows());
          auto gl = logits->grad_matrix();
          gl += g * softmax;
          for (Eigen::Index i = 0; i < logits->rows(); ++i)
            gl(i, owned[static_cast<std::size_t>(i)]) -= g;
        });
  return out;
}

}  // namespace mvproto
