#include "cyin/autograd.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

#include "cyin/errors.hpp"

namespace cyin::ag {

namespace {

thread_local bool g_grad_enabled = true;

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

/// Builds a result node. When no input needs a gradient the node is a
/// plain constant and the closure is dropped.
Var make_node(Matrix value, std::vector<Var> inputs,
              std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (auto& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(fn);
  }
  return Var(std::move(node));
}

/// Parent i if it wants a gradient, else null.
Node* want(Node& self, std::size_t i) {
  Node* p = self.parents[i].get();
  return p->requires_grad ? p : nullptr;
}

Var unary(const Var& a, Matrix value,
          std::function<Matrix(const Matrix& x, const Matrix& y,
                               const Matrix& g)>
              dfn) {
  return make_node(std::move(value), {a}, [dfn](Node& self) {
    if (Node* p = want(self, 0)) p->accumulate(dfn(p->value, self.value, self.grad));
  });
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var scalar_constant(double v) { return constant(Matrix::Constant(1, 1, v)); }

Var leaf(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) {
    throw DimensionError("backward: root must be 1x1");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->has_grad()) n->backward(*n);
  }
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  return make_node(a.value() + b.value(), {a, b}, [](Node& self) {
    if (Node* p = want(self, 0)) p->accumulate(self.grad);
    if (Node* p = want(self, 1)) p->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  return make_node(a.value() - b.value(), {a, b}, [](Node& self) {
    if (Node* p = want(self, 0)) p->accumulate(self.grad);
    if (Node* p = want(self, 1)) p->accumulate(-self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  return make_node(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    const Matrix& av = self.parents[0]->value;
    const Matrix& bv = self.parents[1]->value;
    if (Node* p = want(self, 0)) p->accumulate(self.grad.cwiseProduct(bv));
    if (Node* p = want(self, 1)) p->accumulate(self.grad.cwiseProduct(av));
  });
}

Var scale(const Var& a, double s) {
  return make_node(a.value() * s, {a}, [s](Node& self) {
    if (Node* p = want(self, 0)) p->accumulate(self.grad * s);
  });
}

Var add_scalar(const Var& a, double s) {
  return make_node(a.value().array() + s, {a}, [](Node& self) {
    if (Node* p = want(self, 0)) p->accumulate(self.grad);
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: expected 1x" + std::to_string(a.cols()) +
                         " bias, got " + std::to_string(row.rows()) + "x" +
                         std::to_string(row.cols()));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_node(std::move(out), {a, row}, [](Node& self) {
    if (Node* p = want(self, 0)) p->accumulate(self.grad);
    if (Node* p = want(self, 1)) p->accumulate(self.grad.colwise().sum());
  });
}

Var scale_rows(const Var& a, const Vector& weights) {
  if (weights.size() != a.rows()) {
    throw DimensionError("scale_rows: weight count mismatch");
  }
  Matrix out = weights.asDiagonal() * a.value();
  return make_node(std::move(out), {a}, [weights](Node& self) {
    if (Node* p = want(self, 0)) p->accumulate(weights.asDiagonal() * self.grad);
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) +
                         " and " + std::to_string(b.rows()) + " differ");
  }
  return make_node(a.value() * b.value(), {a, b}, [](Node& self) {
    const Matrix& av = self.parents[0]->value;
    const Matrix& bv = self.parents[1]->value;
    if (Node* p = want(self, 0)) p->accumulate(self.grad * bv.transpose());
    if (Node* p = want(self, 1)) p->accumulate(av.transpose() * self.grad);
  });
}

Var relu(const Var& a) {
  return unary(a, a.value().cwiseMax(0.0),
               [](const Matrix& x, const Matrix&, const Matrix& g) -> Matrix {
                 return (x.array() > 0.0).cast<double>() * g.array();
               });
}

Var tanh(const Var& a) {
  return unary(a, a.value().array().tanh(),
               [](const Matrix&, const Matrix& y, const Matrix& g) -> Matrix {
                 return (1.0 - y.array().square()) * g.array();
               });
}

Var softplus(const Var& a) {
  Matrix out = a.value().unaryExpr([](double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  });
  return unary(a, std::move(out),
               [](const Matrix& x, const Matrix&, const Matrix& g) -> Matrix {
                 Matrix sig = x.unaryExpr([](double v) {
                   return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                   : std::exp(v) / (1.0 + std::exp(v));
                 });
                 return sig.cwiseProduct(g);
               });
}

Var exp(const Var& a) {
  return unary(a, a.value().array().exp(),
               [](const Matrix&, const Matrix& y, const Matrix& g) -> Matrix {
                 return y.cwiseProduct(g);
               });
}

Var log(const Var& a) {
  return unary(a, a.value().array().log(),
               [](const Matrix& x, const Matrix&, const Matrix& g) -> Matrix {
                 return g.cwiseQuotient(x);
               });
}

Var square(const Var& a) {
  return unary(a, a.value().array().square(),
               [](const Matrix& x, const Matrix&, const Matrix& g) -> Matrix {
                 return 2.0 * x.cwiseProduct(g);
               });
}

Var abs(const Var& a) {
  return unary(a, a.value().cwiseAbs(),
               [](const Matrix& x, const Matrix&, const Matrix& g) -> Matrix {
                 Matrix s = x.unaryExpr([](double v) {
                   return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                 });
                 return s.cwiseProduct(g);
               });
}

Var sqrt(const Var& a) {
  return unary(a, a.value().cwiseSqrt(),
               [](const Matrix&, const Matrix& y, const Matrix& g) -> Matrix {
                 return (0.5 * g.array() / y.array()).matrix();
               });
}

Var sum(const Var& a) {
  return make_node(Matrix::Constant(1, 1, a.value().sum()), {a}, [](Node& self) {
    if (Node* p = want(self, 0))
      p->accumulate(Matrix::Constant(p->value.rows(), p->value.cols(),
                                     self.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var row_sum(const Var& a) {
  return make_node(a.value().rowwise().sum(), {a}, [](Node& self) {
    if (Node* p = want(self, 0))
      p->accumulate(self.grad.col(0).replicate(1, p->value.cols()));
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_node(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                   [offsets](Node& self) {
                     for (std::size_t i = 0; i < self.parents.size(); ++i) {
                       if (Node* p = want(self, i))
                         p->accumulate(self.grad.middleCols(offsets[i], p->value.cols()));
                     }
                   });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const Index cols = parts[0].cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw DimensionError("concat_rows: column count mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_node(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                   [offsets](Node& self) {
                     for (std::size_t i = 0; i < self.parents.size(); ++i) {
                       if (Node* p = want(self, i))
                         p->accumulate(self.grad.middleRows(offsets[i], p->value.rows()));
                     }
                   });
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("slice_cols: range out of bounds");
  }
  return make_node(a.value().middleCols(start, count), {a},
                   [start, count](Node& self) {
                     if (Node* p = want(self, 0)) {
                       Matrix g = Matrix::Zero(p->value.rows(), p->value.cols());
                       g.middleCols(start, count) = self.grad;
                       p->accumulate(g);
                     }
                   });
}

Var gather_rows(const Var& a, std::span<const Index> rows) {
  std::vector<Index> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= a.rows()) throw DimensionError("gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = a.value().row(idx[i]);
  }
  return make_node(std::move(out), {a}, [idx](Node& self) {
    if (Node* p = want(self, 0)) {
      Matrix g = Matrix::Zero(p->value.rows(), p->value.cols());
      for (std::size_t i = 0; i < idx.size(); ++i)
        g.row(idx[i]) += self.grad.row(static_cast<Index>(i));
      p->accumulate(g);
    }
  });
}

Var where_rows(const std::vector<bool>& take_a, const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "where_rows");
  if (static_cast<Index>(take_a.size()) != a.rows()) {
    throw DimensionError("where_rows: selector length mismatch");
  }
  Matrix out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i)
    out.row(i) = take_a[static_cast<std::size_t>(i)] ? a.value().row(i) : b.value().row(i);
  return make_node(std::move(out), {a, b}, [take_a](Node& self) {
    Node* pa = want(self, 0);
    Node* pb = want(self, 1);
    Matrix ga = Matrix::Zero(self.grad.rows(), self.grad.cols());
    Matrix gb = ga;
    for (Index i = 0; i < self.grad.rows(); ++i) {
      if (take_a[static_cast<std::size_t>(i)]) {
        ga.row(i) = self.grad.row(i);
      } else {
        gb.row(i) = self.grad.row(i);
      }
    }
    if (pa) pa->accumulate(ga);
    if (pb) pb->accumulate(gb);
  });
}

Var segment_mean(const Var& a, Index seg) {
  if (seg <= 0 || a.rows() % seg != 0) {
    throw DimensionError("segment_mean: rows not divisible by segment length");
  }
  const Index n = a.rows() / seg;
  Matrix out(n, a.cols());
  for (Index i = 0; i < n; ++i) out.row(i) = a.value().middleRows(i * seg, seg).colwise().mean();
  return make_node(std::move(out), {a}, [seg, n](Node& self) {
    if (Node* p = want(self, 0)) {
      Matrix g(p->value.rows(), p->value.cols());
      for (Index i = 0; i < n; ++i)
        g.middleRows(i * seg, seg) = (self.grad.row(i) / static_cast<double>(seg)).replicate(seg, 1);
      p->accumulate(g);
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Index c = x.cols();
  if (gain.rows() != 1 || gain.cols() != c || bias.rows() != 1 || bias.cols() != c) {
    throw DimensionError("layer_norm: gain/bias must be 1x" + std::to_string(c));
  }
  const Matrix& xv = x.value();
  Matrix xhat(xv.rows(), c);
  Vector inv(xv.rows());
  for (Index i = 0; i < xv.rows(); ++i) {
    const double mu = xv.row(i).mean();
    const double var = (xv.row(i).array() - mu).square().mean();
    inv(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * inv(i);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
               bias.value().row(0).array();
  return make_node(std::move(out), {x, gain, bias}, [xhat, inv](Node& self) {
    const Matrix& g = self.grad;
    const Matrix& gv = self.parents[1]->value;
    if (Node* p = want(self, 0)) {
      Matrix dxhat = g.array().rowwise() * gv.row(0).array();
      const double c_d = static_cast<double>(g.cols());
      Matrix dx(g.rows(), g.cols());
      for (Index i = 0; i < g.rows(); ++i) {
        const double m1 = dxhat.row(i).sum() / c_d;
        const double m2 = dxhat.row(i).dot(xhat.row(i)) / c_d;
        dx.row(i) = inv(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
      }
      p->accumulate(dx);
    }
    if (Node* p = want(self, 1)) p->accumulate(g.cwiseProduct(xhat).colwise().sum());
    if (Node* p = want(self, 2)) p->accumulate(g.colwise().sum());
  });
}

namespace {

Matrix softmax_values(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    const double m = a.row(i).maxCoeff();
    auto e = (a.row(i).array() - m).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

}  // namespace

Var softmax_rows(const Var& a) {
  return make_node(softmax_values(a.value()), {a}, [](Node& self) {
    if (Node* p = want(self, 0)) {
      const Matrix& s = self.value;
      Vector dot = self.grad.cwiseProduct(s).rowwise().sum();
      p->accumulate(s.cwiseProduct(self.grad - dot.replicate(1, s.cols())));
    }
  });
}

Var log_softmax_rows(const Var& a) {
  Matrix out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    const double m = a.value().row(i).maxCoeff();
    const double lse = m + std::log((a.value().row(i).array() - m).exp().sum());
    out.row(i) = a.value().row(i).array() - lse;
  }
  return make_node(std::move(out), {a}, [](Node& self) {
    if (Node* p = want(self, 0)) {
      Matrix s = self.value.array().exp();
      Vector gsum = self.grad.rowwise().sum();
      p->accumulate(self.grad - s.cwiseProduct(gsum.replicate(1, s.cols())));
    }
  });
}

Matrix attention_weights(const Matrix& q, const Matrix& k, double scale) {
  return softmax_values(q * k.transpose() * scale);
}

Var segment_attention(const Var& q, const Var& k, const Var& v, Index seg,
                      double scale) {
  if (q.rows() != k.rows() || k.rows() != v.rows()) {
    throw DimensionError("segment_attention: q/k/v row counts differ");
  }
  if (q.cols() != k.cols()) {
    throw DimensionError("segment_attention: q/k widths differ");
  }
  if (seg <= 0 || q.rows() % seg != 0) {
    throw DimensionError("segment_attention: rows not divisible by segment length");
  }
  const Index n = q.rows() / seg;
  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(n));
  Matrix out(q.rows(), v.cols());
  for (Index s = 0; s < n; ++s) {
    Matrix p = attention_weights(q.value().middleRows(s * seg, seg),
                                 k.value().middleRows(s * seg, seg), scale);
    out.middleRows(s * seg, seg) = p * v.value().middleRows(s * seg, seg);
    (*probs)[static_cast<std::size_t>(s)] = std::move(p);
  }
  return make_node(std::move(out), {q, k, v}, [probs, seg, n, scale](Node& self) {
    const Matrix& qv = self.parents[0]->value;
    const Matrix& kv = self.parents[1]->value;
    const Matrix& vv = self.parents[2]->value;
    Node* pq = want(self, 0);
    Node* pk = want(self, 1);
    Node* pv = want(self, 2);
    Matrix gq = Matrix::Zero(qv.rows(), qv.cols());
    Matrix gk = Matrix::Zero(kv.rows(), kv.cols());
    Matrix gv = Matrix::Zero(vv.rows(), vv.cols());
    for (Index s = 0; s < n; ++s) {
      const Matrix& p = (*probs)[static_cast<std::size_t>(s)];
      const Matrix dout = self.grad.middleRows(s * seg, seg);
      gv.middleRows(s * seg, seg) = p.transpose() * dout;
      Matrix dp = dout * vv.middleRows(s * seg, seg).transpose();
      Vector dot = dp.cwiseProduct(p).rowwise().sum();
      Matrix ds = p.cwiseProduct(dp - dot.replicate(1, p.cols()));
      gq.middleRows(s * seg, seg) = ds * kv.middleRows(s * seg, seg) * scale;
      gk.middleRows(s * seg, seg) = ds.transpose() * qv.middleRows(s * seg, seg) * scale;
    }
    if (pq) pq->accumulate(gq);
    if (pk) pk->accumulate(gk);
    if (pv) pv->accumulate(gv);
  });
}

}  // namespace cyin::ag
