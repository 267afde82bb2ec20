#pragma once

#include <Eigen/SparseCore>

#include <functional>
#include <memory>
#include <vector>

#include "p2p/pose.hpp"

// Reverse-mode automatic differentiation over dense row-major matrices.
// Every op records its inputs and a backward closure; backward() walks the
// graph in reverse topological order. Gradients accumulate, so parameters
// must be zeroed between steps.
namespace p2p::ad {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Matrix& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }
  bool defined() const { return static_cast<bool>(node_); }
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  friend Var make_result(Matrix, std::vector<Var>, std::function<void(Node&)>);
  std::shared_ptr<Node> node_;
};

/// Creates an op result. The backward closure is dropped when no input needs
/// gradients or when a NoGradGuard is active.
Var make_result(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward);

/// Disables graph recording on this thread while alive.
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

/// Seeds d(out)/d(out) = 1 for a 1x1 output and propagates.
void backward(const Var& out);

Var constant(Matrix value);

Var matmul(const Var& a, const Var& b);
/// x * W + b with b a 1 x out row broadcast over rows.
Var linear(const Var& x, const Var& W, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_constant(const Var& a, const Matrix& c);
Var gelu(const Var& a);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
/// out.row(i) = a.row(index[i]); gradients scatter-add.
Var gather_rows(const Var& a, const std::vector<int>& index);

/// Column-wise max over row segments [offsets[s], offsets[s+1]). Gradient goes
/// to the first row attaining the max.
Var segment_max(const Var& a, const std::vector<int>& offsets);
/// Column-wise mean over row segments.
Var segment_mean(const Var& a, const std::vector<int>& offsets);

using SparseOp = Eigen::SparseMatrix<double, Eigen::RowMajor>;
/// S * a for a constant sparse S.
Var sparse_left_mul(std::shared_ptr<const SparseOp> S, const Var& a);

Var sum(const Var& a);

/// sum over elements of 50 d^2 if d < tau else d - 0.005, with d = |pred - target|.
Var smooth_l1(const Var& pred, const Matrix& target, double tau);
double smooth_l1_value(double d, double tau);
double smooth_l1_derivative(double d, double tau);

/// Token groups for attention: each query row attends only the key rows of its group.
struct AttentionGroup {
  std::vector<int> queries;
  std::vector<int> keys;
};

/// Records per-(group, head) softmax weight matrices when passed to attention.
struct AttentionProbe {
  std::vector<Matrix> weights;
};

/// Multi-head scaled dot-product attention. Columns of q, k, v are split into
/// `heads` equal slices; each head uses softmax(Q K^T / sqrt(d_head)) V within
/// every group. Query rows not covered by any group produce zeros.
Var attention(const Var& q, const Var& k, const Var& v, const std::vector<AttentionGroup>& groups, int heads,
              AttentionProbe* probe = nullptr);

}  // namespace p2p::ad
