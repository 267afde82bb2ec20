#include "p2p/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <unordered_set>

#include "p2p/errors.hpp"

namespace p2p::ad {
namespace {

thread_local bool g_grad_enabled = true;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

bool wants(const Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }

}  // namespace

Matrix& Node::grad_buffer() {
  if (grad.rows() != value.rows() || grad.cols() != value.cols()) grad = Matrix::Zero(value.rows(), value.cols());
  return grad;
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

void Var::zero_grad() {
  if (node_) node_->grad.setZero(node_->value.rows(), node_->value.cols());
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Var make_result(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  Var out;
  out.node_ = std::make_shared<Node>();
  out.node_->value = std::move(value);
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  out.node_->requires_grad = true;
  for (auto& in : inputs) out.node_->inputs.push_back(in.node());
  out.node_->backward = std::move(backward_fn);
  return out;
}

void backward(const Var& out) {
  if (out.rows() != 1 || out.cols() != 1) throw ShapeError("backward: output must be 1x1");
  if (!out.requires_grad()) return;
  // iterative post-order DFS
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{out.node().get(), 0}};
  seen.insert(out.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  out.node()->grad_buffer()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() > 0) n->backward(*n);
  }
}

Var constant(Matrix value) { return Var(std::move(value), false); }

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Matrix v = a.value() * b.value();
  return make_result(std::move(v), {a, b}, [](Node& self) {
    const Matrix& g = self.grad;
    if (wants(self, 0)) self.inputs[0]->grad_buffer().noalias() += g * self.inputs[1]->value.transpose();
    if (wants(self, 1)) self.inputs[1]->grad_buffer().noalias() += self.inputs[0]->value.transpose() * g;
  });
}

Var linear(const Var& x, const Var& W, const Var& b) {
  if (x.cols() != W.rows() || b.rows() != 1 || b.cols() != W.cols()) throw ShapeError("linear: shape mismatch");
  Matrix v = x.value() * W.value();
  v.rowwise() += b.value().row(0);
  return make_result(std::move(v), {x, W, b}, [](Node& self) {
    const Matrix& g = self.grad;
    if (wants(self, 0)) self.inputs[0]->grad_buffer().noalias() += g * self.inputs[1]->value.transpose();
    if (wants(self, 1)) self.inputs[1]->grad_buffer().noalias() += self.inputs[0]->value.transpose() * g;
    if (wants(self, 2)) self.inputs[2]->grad_buffer() += g.colwise().sum();
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_result(a.value() + b.value(), {a, b}, [](Node& self) {
    if (wants(self, 0)) self.inputs[0]->grad_buffer() += self.grad;
    if (wants(self, 1)) self.inputs[1]->grad_buffer() += self.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_result(a.value() - b.value(), {a, b}, [](Node& self) {
    if (wants(self, 0)) self.inputs[0]->grad_buffer() += self.grad;
    if (wants(self, 1)) self.inputs[1]->grad_buffer() -= self.grad;
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return make_result(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    if (wants(self, 0)) self.inputs[0]->grad_buffer() += self.grad.cwiseProduct(self.inputs[1]->value);
    if (wants(self, 1)) self.inputs[1]->grad_buffer() += self.grad.cwiseProduct(self.inputs[0]->value);
  });
}

Var scale(const Var& a, double s) {
  return make_result(a.value() * s, {a}, [s](Node& self) { self.inputs[0]->grad_buffer() += s * self.grad; });
}

Var add_constant(const Var& a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) throw ShapeError("add_constant: shape mismatch");
  return make_result(a.value() + c, {a}, [](Node& self) { self.inputs[0]->grad_buffer() += self.grad; });
}

Var gelu(const Var& a) {
  const Matrix v = a.value().unaryExpr([](double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); });
  return make_result(v, {a}, [](Node& self) {
    const Matrix& x = self.inputs[0]->value;
    const Matrix d = x.unaryExpr([](double t) {
      const double cdf = 0.5 * (1.0 + std::erf(t / std::numbers::sqrt2));
      const double pdf = std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
      return cdf + t * pdf;
    });
    self.inputs[0]->grad_buffer() += self.grad.cwiseProduct(d);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_result(std::move(v), parts, [](Node& self) {
    Eigen::Index c = 0;
    for (auto& in : self.inputs) {
      const Eigen::Index w = in->value.cols();
      if (in->requires_grad) in->grad_buffer() += self.grad.middleCols(c, w);
      c += w;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_result(std::move(v), parts, [](Node& self) {
    Eigen::Index r = 0;
    for (auto& in : self.inputs) {
      const Eigen::Index h = in->value.rows();
      if (in->requires_grad) in->grad_buffer() += self.grad.middleRows(r, h);
      r += h;
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: out of range");
  return make_result(a.value().middleCols(start, count), {a}, [start, count](Node& self) {
    self.inputs[0]->grad_buffer().middleCols(start, count) += self.grad;
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows: out of range");
  return make_result(a.value().middleRows(start, count), {a}, [start, count](Node& self) {
    self.inputs[0]->grad_buffer().middleRows(start, count) += self.grad;
  });
}

Var gather_rows(const Var& a, const std::vector<int>& index) {
  Matrix v(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) throw ShapeError("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  return make_result(std::move(v), {a}, [index](Node& self) {
    Matrix& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < index.size(); ++i) g.row(index[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var segment_max(const Var& a, const std::vector<int>& offsets) {
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != a.rows()) {
    throw ShapeError("segment_max: offsets must span the rows");
  }
  const auto segments = static_cast<Eigen::Index>(offsets.size() - 1);
  const Eigen::Index cols = a.cols();
  Matrix v(segments, cols);
  std::vector<int> arg(static_cast<std::size_t>(segments * cols));
  const Matrix& x = a.value();
  for (Eigen::Index s = 0; s < segments; ++s) {
    const int lo = offsets[s];
    const int hi = offsets[s + 1];
    if (hi <= lo) throw ShapeError("segment_max: empty segment");
    for (Eigen::Index c = 0; c < cols; ++c) {
      int best = lo;
      for (int r = lo + 1; r < hi; ++r) {
        if (x(r, c) > x(best, c)) best = r;
      }
      v(s, c) = x(best, c);
      arg[static_cast<std::size_t>(s * cols + c)] = best;
    }
  }
  return make_result(std::move(v), {a}, [arg = std::move(arg), cols](Node& self) {
    Matrix& g = self.inputs[0]->grad_buffer();
    for (Eigen::Index s = 0; s < self.grad.rows(); ++s) {
      for (Eigen::Index c = 0; c < cols; ++c) g(arg[static_cast<std::size_t>(s * cols + c)], c) += self.grad(s, c);
    }
  });
}

Var segment_mean(const Var& a, const std::vector<int>& offsets) {
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != a.rows()) {
    throw ShapeError("segment_mean: offsets must span the rows");
  }
  const auto segments = static_cast<Eigen::Index>(offsets.size() - 1);
  Matrix v(segments, a.cols());
  for (Eigen::Index s = 0; s < segments; ++s) {
    const int n = offsets[s + 1] - offsets[s];
    if (n <= 0) throw ShapeError("segment_mean: empty segment");
    v.row(s) = a.value().middleRows(offsets[s], n).colwise().sum() / n;
  }
  return make_result(std::move(v), {a}, [offsets](Node& self) {
    Matrix& g = self.inputs[0]->grad_buffer();
    for (Eigen::Index s = 0; s < self.grad.rows(); ++s) {
      const int n = offsets[s + 1] - offsets[s];
      g.middleRows(offsets[s], n).rowwise() += self.grad.row(s) / n;
    }
  });
}

Var sparse_left_mul(std::shared_ptr<const SparseOp> S, const Var& a) {
  if (S->cols() != a.rows()) throw ShapeError("sparse_left_mul: inner dimensions differ");
  Matrix v = (*S) * a.value();
  return make_result(std::move(v), {a}, [S](Node& self) {
    self.inputs[0]->grad_buffer() += S->transpose() * self.grad;
  });
}

Var sum(const Var& a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return make_result(std::move(v), {a}, [](Node& self) { self.inputs[0]->grad_buffer().array() += self.grad(0, 0); });
}

double smooth_l1_value(double d, double tau) { return d < tau ? 50.0 * d * d : d - 0.005; }

double smooth_l1_derivative(double d, double tau) { return d < tau ? 100.0 * d : 1.0; }

Var smooth_l1(const Var& pred, const Matrix& target, double tau) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ShapeError("smooth_l1: shape mismatch");
  if (!(tau > 0.0)) throw ShapeError("smooth_l1: tau must be positive");
  const Matrix diff = pred.value() - target;
  Matrix v(1, 1);
  v(0, 0) = diff.unaryExpr([tau](double x) { return smooth_l1_value(std::abs(x), tau); }).sum();
  return make_result(std::move(v), {pred}, [diff, tau](Node& self) {
    const double g = self.grad(0, 0);
    self.inputs[0]->grad_buffer() += diff.unaryExpr([tau, g](double x) {
      const double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      return g * s * smooth_l1_derivative(std::abs(x), tau);
    });
  });
}

Var attention(const Var& q, const Var& k, const Var& v, const std::vector<AttentionGroup>& groups, int heads,
              AttentionProbe* probe) {
  if (heads < 1 || q.cols() % heads != 0 || q.cols() != k.cols()) {
    throw ShapeError("attention: query/key widths must match and divide by heads");
  }
  if (k.rows() != v.rows() || v.cols() % heads != 0) throw ShapeError("attention: key/value shapes disagree");
  const Eigen::Index dk = q.cols() / heads;
  const Eigen::Index dv = v.cols() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  Matrix out = Matrix::Zero(q.rows(), v.cols());
  // probabilities per (group, head), kept for backward
  std::vector<Matrix> probs;
  probs.reserve(groups.size() * static_cast<std::size_t>(heads));
  for (const auto& grp : groups) {
    const auto nq = static_cast<Eigen::Index>(grp.queries.size());
    const auto nk = static_cast<Eigen::Index>(grp.keys.size());
    if (nk == 0 && nq > 0) throw ShapeError("attention: group without keys");
    for (int h = 0; h < heads; ++h) {
      Matrix Qh(nq, dk), Kh(nk, dk), Vh(nk, dv);
      for (Eigen::Index i = 0; i < nq; ++i) Qh.row(i) = q.value().row(grp.queries[i]).segment(h * dk, dk);
      for (Eigen::Index i = 0; i < nk; ++i) {
        Kh.row(i) = k.value().row(grp.keys[i]).segment(h * dk, dk);
        Vh.row(i) = v.value().row(grp.keys[i]).segment(h * dv, dv);
      }
      Matrix P = (Qh * Kh.transpose()) * inv_sqrt;
      for (Eigen::Index i = 0; i < nq; ++i) {
        const double m = P.row(i).maxCoeff();
        P.row(i) = (P.row(i).array() - m).exp().matrix();
        P.row(i) /= P.row(i).sum();
      }
      const Matrix O = P * Vh;
      for (Eigen::Index i = 0; i < nq; ++i) out.row(grp.queries[i]).segment(h * dv, dv) = O.row(i);
      if (probe) probe->weights.push_back(P);
      probs.push_back(std::move(P));
    }
  }
  return make_result(std::move(out), {q, k, v}, [groups, heads, dk, dv, inv_sqrt, probs = std::move(probs)](Node& self) {
    const Matrix& qv = self.inputs[0]->value;
    const Matrix& kv = self.inputs[1]->value;
    const Matrix& vv = self.inputs[2]->value;
    const bool gq = self.inputs[0]->requires_grad;
    const bool gk = self.inputs[1]->requires_grad;
    const bool gv = self.inputs[2]->requires_grad;
    Matrix* dq = gq ? &self.inputs[0]->grad_buffer() : nullptr;
    Matrix* dkm = gk ? &self.inputs[1]->grad_buffer() : nullptr;
    Matrix* dvm = gv ? &self.inputs[2]->grad_buffer() : nullptr;
    std::size_t pi = 0;
    for (const auto& grp : groups) {
      const auto nq = static_cast<Eigen::Index>(grp.queries.size());
      const auto nk = static_cast<Eigen::Index>(grp.keys.size());
      for (int h = 0; h < heads; ++h, ++pi) {
        const Matrix& P = probs[pi];
        Matrix Qh(nq, dk), Kh(nk, dk), Vh(nk, dv), dO(nq, dv);
        for (Eigen::Index i = 0; i < nq; ++i) {
          Qh.row(i) = qv.row(grp.queries[i]).segment(h * dk, dk);
          dO.row(i) = self.grad.row(grp.queries[i]).segment(h * dv, dv);
        }
        for (Eigen::Index i = 0; i < nk; ++i) {
          Kh.row(i) = kv.row(grp.keys[i]).segment(h * dk, dk);
          Vh.row(i) = vv.row(grp.keys[i]).segment(h * dv, dv);
        }
        if (dvm) {
          const Matrix dVh = P.transpose() * dO;
          for (Eigen::Index i = 0; i < nk; ++i) dvm->row(grp.keys[i]).segment(h * dv, dv) += dVh.row(i);
        }
        if (!dq && !dkm) continue;
        const Matrix dP = dO * Vh.transpose();
        Matrix dS = P.cwiseProduct(dP);
        const Eigen::VectorXd rowdot = dS.rowwise().sum();
        dS -= P.cwiseProduct(rowdot.replicate(1, nk));
        dS *= inv_sqrt;
        if (dq) {
          const Matrix dQh = dS * Kh;
          for (Eigen::Index i = 0; i < nq; ++i) dq->row(grp.queries[i]).segment(h * dk, dk) += dQh.row(i);
        }
        if (dkm) {
          const Matrix dKh = dS.transpose() * Qh;
          for (Eigen::Index i = 0; i < nk; ++i) dkm->row(grp.keys[i]).segment(h * dk, dk) += dKh.row(i);
        }
      }
    }
  });
}

}  // namespace p2p::ad
