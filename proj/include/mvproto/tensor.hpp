#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mvproto {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense 64-bit float tensor (rank 0, 1 or 2) with an optional gradient
/// buffer. Values are stored flat in row-major order. Tensors participate in
/// reverse-mode differentiation through the thread-local Tape: operations on
/// tensors record their gradient rule when any input requires a gradient.
class Tensor {
 public:
  Tensor(std::vector<Eigen::Index> shape, Eigen::ArrayXd values, bool requires_grad);

  static TensorPtr scalar(double value, bool requires_grad = false);
  static TensorPtr from_vector(Eigen::VectorXd values, bool requires_grad = false);
  static TensorPtr from_matrix(const Eigen::Ref<const RowMatrixXd>& values,
                               bool requires_grad = false);
  static TensorPtr from_array(std::vector<Eigen::Index> shape, Eigen::ArrayXd values,
                              bool requires_grad = false);
  static TensorPtr zeros(std::vector<Eigen::Index> shape, bool requires_grad = false);

  const std::vector<Eigen::Index>& shape() const { return shape_; }
  Eigen::Index size() const { return values_.size(); }
  int rank() const { return static_cast<int>(shape_.size()); }
  bool is_scalar() const { return shape_.empty(); }
  Eigen::Index rows() const;  // rank-2 only
  Eigen::Index cols() const;  // rank-2 only
  std::string shape_string() const;

  /// Scalar payload; contract-checked.
  double value() const;

  Eigen::ArrayXd& values() { return values_; }
  const Eigen::ArrayXd& values() const { return values_; }

  bool requires_grad() const { return requires_grad_; }
  /// Turns this tensor into a gradient-carrying one (zero-filled buffer).
  void enable_grad();
  Eigen::ArrayXd& grad();
  const Eigen::ArrayXd& grad() const;
  void zero_grad();

  // Rank-2 matrix views over the flat storage.
  Eigen::Map<const RowMatrixXd> matrix() const;
  Eigen::Map<RowMatrixXd> matrix();
  Eigen::Map<RowMatrixXd> grad_matrix();
  Eigen::Map<const RowMatrixXd> grad_matrix() const;

  Eigen::Map<const Eigen::VectorXd> vector() const;

 private:
  std::vector<Eigen::Index> shape_;
  Eigen::ArrayXd values_;
  Eigen::ArrayXd grad_;
  bool requires_grad_ = false;
};

/// Ordered record of executed primitives. Replaying the gradient rules in
/// reverse execution order visits every node after all of its consumers, so
/// each accumulated gradient is complete before it is read. One tape per
/// thread; training loops clear it after every optimizer step.
class Tape {
 public:
  void record(std::vector<TensorPtr> inputs, TensorPtr output, std::function<void()> pull);

  /// Reverse-mode sweep from a scalar root recorded on this tape. Gradients
  /// of intermediate results are reset first; leaf gradients accumulate
  /// across calls until explicitly zeroed.
  void backward(const TensorPtr& root);

  void clear();
  std::size_t size() const { return nodes_.size(); }

  static Tape& active();

 private:
  struct Node {
    std::vector<TensorPtr> inputs;
    TensorPtr output;
    std::function<void()> pull;
  };
  std::vector<Node> nodes_;
};

bool grad_enabled();

/// Disables gradient recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

void backward(const TensorPtr& root);

// Matrix product, rank-2 x rank-2.
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);

// Elementwise binaries; shapes must match exactly except that either side
// may be a scalar (the only supported broadcast).
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);

// Elementwise unaries.
TensorPtr tanh(const TensorPtr& x);
TensorPtr sigmoid(const TensorPtr& x);
TensorPtr relu(const TensorPtr& x);
TensorPtr square(const TensorPtr& x);
TensorPtr sqrt(const TensorPtr& x);
TensorPtr reciprocal(const TensorPtr& x);  // 1/x, x != 0
TensorPtr log(const TensorPtr& x);         // x > 0
TensorPtr neg(const TensorPtr& x);
TensorPtr scale(const TensorPtr& x, double factor);
TensorPtr add_scalar(const TensorPtr& x, double offset);
TensorPtr clamp_max(const TensorPtr& x, double ceiling);

// Reductions.
TensorPtr sum(const TensorPtr& x);
TensorPtr mean(const TensorPtr& x);

/// min over each row; ties resolved to the lowest column index.
TensorPtr row_min(const TensorPtr& x);
/// out[j] = min over i > j of x(j, i); defined for square rank-2 input with
/// at least two rows, output has rows-1 entries.
TensorPtr row_min_upper(const TensorPtr& x);

// Shape plumbing (gradient passes through).
TensorPtr flatten(const TensorPtr& x);
TensorPtr as_row(const TensorPtr& x);  // {k} -> {1,k}
TensorPtr slice_cols(const TensorPtr& x, Eigen::Index start, Eigen::Index count);
TensorPtr concat(const std::vector<TensorPtr>& parts);       // rank-1 parts
TensorPtr concat_cols(const std::vector<TensorPtr>& parts);  // rank-2 parts, equal rows

/// Broadcast a rank-1 bias over the rows of a rank-2 tensor.
TensorPtr add_bias(const TensorPtr& m, const TensorPtr& bias);

/// L2 distance between two rank-1 tensors; the gradient at coinciding
/// inputs is the zero subgradient.
TensorPtr euclidean_distance(const TensorPtr& a, const TensorPtr& b);

/// Row-wise L2 distance between two equal-shape rank-2 tensors -> {rows}.
TensorPtr row_distance(const TensorPtr& a, const TensorPtr& b);

/// All-pairs L2 distances between the rows of x {n,k} and p {m,k} -> {n,m}.
TensorPtr pairwise_distance(const TensorPtr& x, const TensorPtr& p);

/// Mean over the batch of -log softmax(logits)[label]; max-stabilized.
TensorPtr softmax_cross_entropy(const TensorPtr& logits, std::span<const int> labels);

}  // namespace mvproto
