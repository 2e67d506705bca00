#pragma once

// Minimal reverse-mode automatic differentiation over dense double matrices.
//
// A Var is a handle to a graph node. Leaf nodes that require gradients are
// model parameters; every op records a closure that pushes the node's
// gradient into its parents. backward() runs the closures in reverse
// topological order. Batched token data is laid out sample-major: sample n
// occupies rows [n*L, (n+1)*L).

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cyin::ag {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
  bool has_grad() const { return grad.size() != 0; }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  /// Direct write access, used for parameter updates and engineered weights.
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return node_->has_grad(); }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }

  bool defined() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Var constant(Matrix value);
Var scalar_constant(double v);
/// Trainable leaf.
Var leaf(Matrix value);

/// Runs reverse accumulation from a 1x1 root.
void backward(const Var& root);

// Elementwise arithmetic (shapes must agree).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var neg(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

/// a (n x c) + row (1 x c) broadcast over rows.
Var add_row(const Var& a, const Var& row);
/// Multiplies row i of a by the constant weights[i].
Var scale_rows(const Var& a, const Vector& weights);
Var matmul(const Var& a, const Var& b);

Var relu(const Var& a);
Var tanh(const Var& a);
Var softplus(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var abs(const Var& a);
Var sqrt(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);
/// n x c -> n x 1.
Var row_sum(const Var& a);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, Index start, Index count);
Var gather_rows(const Var& a, std::span<const Index> rows);
/// Row i taken from a when take_a[i], else from b.
Var where_rows(const std::vector<bool>& take_a, const Var& a, const Var& b);
/// Mean over consecutive row segments of length seg: (n*seg) x c -> n x c.
Var segment_mean(const Var& a, Index seg);

/// Per-row layer normalization with learned gain/bias (both 1 x c).
Var layer_norm(const Var& x, const Var& gain, const Var& bias,
               double eps = 1e-5);

Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);

/// Scaled dot-product attention applied independently to every segment of
/// seg rows: softmax(Q K^T * scale) V per segment.
Var segment_attention(const Var& q, const Var& k, const Var& v, Index seg,
                      double scale);

/// Attention probabilities of one segment (plain values, no graph).
Matrix attention_weights(const Matrix& q, const Matrix& k, double scale);

}  // namespace cyin::ag
