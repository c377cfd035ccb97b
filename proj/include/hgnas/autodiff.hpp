#pragma once

// Reverse-mode differentiation over dense row-major Eigen matrices.
//
// A Tape records every intermediate value in creation order. Since an operation
// can only consume values that already exist, reverse creation order is a valid
// reverse topological order, and backward() visits each node exactly once.

#include "hgnas/types.hpp"

#include <cassert>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace hgnas::ad {

template <typename Scalar>
class Tape;

template <typename Scalar>
struct Var {
  using Matrix = RowMatrix<Scalar>;

  Tape<Scalar>* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const { return tape->value(id); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
};

template <typename Scalar>
class Tape {
 public:
  using Matrix = RowMatrix<Scalar>;
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Matrix value) { return push(std::move(value), false, {}); }
  Var<Scalar> variable(Matrix value) { return push(std::move(value), true, {}); }

  // Records an operation result. The node needs a gradient iff any parent does.
  Var<Scalar> record(Matrix value, std::initializer_list<Var<Scalar>> parents, Backward backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id].needs_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }
  Var<Scalar> record(Matrix value, const std::vector<Var<Scalar>>& parents, Backward backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id].needs_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  bool has_grad(std::size_t id) const { return nodes_[id].has_grad; }

  // Gradient of the last backward() target w.r.t. this node; zeros if unreached.
  Matrix grad(std::size_t id) const {
    const Node& n = nodes_[id];
    if (n.has_grad) return n.grad;
    return Matrix::Zero(n.value.rows(), n.value.cols());
  }
  const Matrix& upstream(std::size_t id) const { return nodes_[id].grad; }

  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.has_grad) {
      n.grad += g;
    } else {
      n.grad = g;
      n.has_grad = true;
    }
  }

  // Row-wise accumulation without materialising a full-size gradient.
  Matrix& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
      n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
      n.has_grad = true;
    }
    return n.grad;
  }

  void backward(Var<Scalar> loss) {
    if (loss.rows() != 1 || loss.cols() != 1) throw std::invalid_argument("backward() needs a scalar loss");
    for (auto& n : nodes_) n.has_grad = false;
    if (!nodes_[loss.id].needs_grad) return;
    nodes_[loss.id].grad = Matrix::Ones(1, 1);
    nodes_[loss.id].has_grad = true;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (n.has_grad && n.backward) n.backward(*this, id);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    bool has_grad = false;
    Backward backward;
  };

  Var<Scalar> push(Matrix value, bool needs_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), needs_grad, false, std::move(backward)});
    return Var<Scalar>{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

namespace detail {

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  auto& t = *a.tape;
  return t.record(a.value() * b.value(), {a, b}, [a, b](Tape<Scalar>& tp, std::size_t self) {
    const auto& g = tp.upstream(self);
    if (tp.needs_grad(a.id)) tp.accumulate(a.id, g * tp.value(b.id).transpose());
    if (tp.needs_grad(b.id)) tp.accumulate(b.id, tp.value(a.id).transpose() * g);
  });
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape(a, b, "add");
  return a.tape->record(a.value() + b.value(), {a, b}, [a, b](Tape<Scalar>& tp, std::size_t self) {
    tp.accumulate(a.id, tp.upstream(self));
    tp.accumulate(b.id, tp.upstream(self));
  });
}

template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape(a, b, "sub");
  return a.tape->record(a.value() - b.value(), {a, b}, [a, b](Tape<Scalar>& tp, std::size_t self) {
    tp.accumulate(a.id, tp.upstream(self));
    tp.accumulate(b.id, -tp.upstream(self));
  });
}

// a + 1 * row, broadcasting a 1 x c row over every row of a.
template <typename Scalar>
Var<Scalar> add_row(Var<Scalar> a, Var<Scalar> row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: bad row shape");
  RowMatrix<Scalar> v = a.value().rowwise() + row.value().row(0);
  return a.tape->record(std::move(v), {a, row}, [a, row](Tape<Scalar>& tp, std::size_t self) {
    tp.accumulate(a.id, tp.upstream(self));
    if (tp.needs_grad(row.id)) tp.accumulate(row.id, tp.upstream(self).colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
  return a.tape->record(a.value() * s, {a}, [a, s](Tape<Scalar>& tp, std::size_t self) {
    tp.accumulate(a.id, tp.upstream(self) * s);
  });
}

template <typename Scalar>
Var<Scalar> cwise_mul(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape(a, b, "cwise_mul");
  return a.tape->record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape<Scalar>& tp, std::size_t self) {
    const auto& g = tp.upstream(self);
    if (tp.needs_grad(a.id)) tp.accumulate(a.id, g.cwiseProduct(tp.value(b.id)));
    if (tp.needs_grad(b.id)) tp.accumulate(b.id, g.cwiseProduct(tp.value(a.id)));
  });
}

// Exponential-linear unit, alpha = 1.
template <typename Scalar>
Var<Scalar> elu(Var<Scalar> a) {
  RowMatrix<Scalar> v = a.value().unaryExpr([](Scalar x) { return x > Scalar(0) ? x : std::expm1(x); });
  return a.tape->record(std::move(v), {a}, [a](Tape<Scalar>& tp, std::size_t self) {
    RowMatrix<Scalar> d = tp.value(a.id).unaryExpr([](Scalar x) { return x > Scalar(0) ? Scalar(1) : std::exp(x); });
    tp.accumulate(a.id, tp.upstream(self).cwiseProduct(d));
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
  RowMatrix<Scalar> v = a.value().unaryExpr([](Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); });
  return a.tape->record(std::move(v), {a}, [a](Tape<Scalar>& tp, std::size_t self) {
    const auto& y = tp.value(self);
    tp.accumulate(a.id, tp.upstream(self).cwiseProduct(y.cwiseProduct((Scalar(1) - y.array()).matrix())));
  });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> a) {
  RowMatrix<Scalar> v = a.value().array().tanh().matrix();
  return a.tape->record(std::move(v), {a}, [a](Tape<Scalar>& tp, std::size_t self) {
    const auto& y = tp.value(self);
    tp.accumulate(a.id, tp.upstream(self).cwiseProduct((Scalar(1) - y.array().square()).matrix()));
  });
}

// Elementwise maximum; ties route the gradient to `a`.
template <typename Scalar>
Var<Scalar> maximum(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape(a, b, "maximum");
  RowMatrix<Scalar> v = a.value().cwiseMax(b.value());
  return a.tape->record(std::move(v), {a, b}, [a, b](Tape<Scalar>& tp, std::size_t self) {
    const auto& g = tp.upstream(self);
    auto pick_a = (tp.value(a.id).array() >= tp.value(b.id).array());
    if (tp.needs_grad(a.id)) tp.accumulate(a.id, pick_a.select(g.array(), Scalar(0)).matrix());
    if (tp.needs_grad(b.id)) tp.accumulate(b.id, pick_a.select(Scalar(0), g.array()).matrix());
  });
}

template <typename Scalar>
Var<Scalar> mean_rows(Var<Scalar> a) {
  const Scalar n = static_cast<Scalar>(std::max<Index>(a.rows(), 1));
  RowMatrix<Scalar> v = a.value().colwise().sum() / n;
  return a.tape->record(std::move(v), {a}, [a, n](Tape<Scalar>& tp, std::size_t self) {
    RowMatrix<Scalar> g = tp.upstream(self).replicate(tp.value(a.id).rows(), 1) / n;
    tp.accumulate(a.id, g);
  });
}

template <typename Scalar>
Var<Scalar> sum_all(Var<Scalar> a) {
  RowMatrix<Scalar> v(1, 1);
  v(0, 0) = a.value().sum();
  return a.tape->record(std::move(v), {a}, [a](Tape<Scalar>& tp, std::size_t self) {
    const Scalar g = tp.upstream(self)(0, 0);
    tp.accumulate(a.id, RowMatrix<Scalar>::Constant(tp.value(a.id).rows(), tp.value(a.id).cols(), g));
  });
}

template <typename Scalar>
Var<Scalar> block_cols(Var<Scalar> a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::invalid_argument("block_cols: out of range");
  RowMatrix<Scalar> v = a.value().middleCols(start, count);
  return a.tape->record(std::move(v), {a}, [a, start, count](Tape<Scalar>& tp, std::size_t self) {
    tp.grad_buffer(a.id).middleCols(start, count) += tp.upstream(self);
  });
}

template <typename Scalar>
Var<Scalar> block_rows(Var<Scalar> a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::invalid_argument("block_rows: out of range");
  RowMatrix<Scalar> v = a.value().middleRows(start, count);
  return a.tape->record(std::move(v), {a}, [a, start, count](Tape<Scalar>& tp, std::size_t self) {
    tp.grad_buffer(a.id).middleRows(start, count) += tp.upstream(self);
  });
}

template <typename Scalar>
Var<Scalar> concat_cols(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: nothing to concatenate");
  Index rows = parts.front().rows(), cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
  }
  RowMatrix<Scalar> v(rows, cols);
  Index c = 0;
  for (const auto& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return parts.front().tape->record(std::move(v), parts, [parts](Tape<Scalar>& tp, std::size_t self) {
    Index c0 = 0;
    for (const auto& p : parts) {
      const Index w = tp.value(p.id).cols();
      if (tp.needs_grad(p.id)) tp.accumulate(p.id, tp.upstream(self).middleCols(c0, w));
      c0 += w;
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_rows(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: nothing to concatenate");
  Index cols = parts.front().cols(), rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.rows();
  }
  RowMatrix<Scalar> v(rows, cols);
  Index r = 0;
  for (const auto& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return parts.front().tape->record(std::move(v), parts, [parts](Tape<Scalar>& tp, std::size_t self) {
    Index r0 = 0;
    for (const auto& p : parts) {
      const Index n = tp.value(p.id).rows();
      if (tp.needs_grad(p.id)) tp.accumulate(p.id, tp.upstream(self).middleRows(r0, n));
      r0 += n;
    }
  });
}

// Softmax along each row.
template <typename Scalar>
Var<Scalar> softmax_rows(Var<Scalar> a) {
  RowMatrix<Scalar> v = a.value();
  for (Index i = 0; i < v.rows(); ++i) {
    const Scalar m = v.row(i).maxCoeff();
    v.row(i) = (v.row(i).array() - m).exp().matrix();
    v.row(i) /= v.row(i).sum();
  }
  return a.tape->record(std::move(v), {a}, [a](Tape<Scalar>& tp, std::size_t self) {
    const auto& y = tp.value(self);
    const auto& g = tp.upstream(self);
    RowMatrix<Scalar> d(y.rows(), y.cols());
    for (Index i = 0; i < y.rows(); ++i) {
      const Scalar dot = y.row(i).dot(g.row(i));
      d.row(i) = y.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
    }
    tp.accumulate(a.id, d);
  });
}

// a * s where s is a 1 x 1 variable.
template <typename Scalar>
Var<Scalar> scale_by(Var<Scalar> a, Var<Scalar> s) {
  if (s.rows() != 1 || s.cols() != 1) throw std::invalid_argument("scale_by: scale must be 1 x 1");
  return a.tape->record(a.value() * s.value()(0, 0), {a, s}, [a, s](Tape<Scalar>& tp, std::size_t self) {
    const auto& g = tp.upstream(self);
    if (tp.needs_grad(a.id)) tp.accumulate(a.id, g * tp.value(s.id)(0, 0));
    if (tp.needs_grad(s.id)) {
      RowMatrix<Scalar> gs(1, 1);
      gs(0, 0) = g.cwiseProduct(tp.value(a.id)).sum();
      tp.accumulate(s.id, gs);
    }
  });
}

// Mean softmax cross-entropy over the listed rows of `logits`.
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(Var<Scalar> logits, const std::vector<int>& labels, const std::vector<Index>& rows) {
  if (rows.empty()) throw std::invalid_argument("softmax_cross_entropy: no rows");
  const auto& z = logits.value();
  RowMatrix<Scalar> probs(static_cast<Index>(rows.size()), z.cols());
  Scalar loss = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Index i = rows[k];
    const Scalar m = z.row(i).maxCoeff();
    auto e = (z.row(i).array() - m).exp();
    const Scalar sum = e.sum();
    probs.row(static_cast<Index>(k)) = (e / sum).matrix();
    loss += -(z(i, labels[static_cast<std::size_t>(i)]) - m - std::log(sum));
  }
  const Scalar n = static_cast<Scalar>(rows.size());
  RowMatrix<Scalar> v(1, 1);
  v(0, 0) = loss / n;
  return logits.tape->record(std::move(v), {logits},
                             [logits, labels, rows, probs = std::move(probs), n](Tape<Scalar>& tp, std::size_t self) {
                               const Scalar g = tp.upstream(self)(0, 0);
                               auto& buf = tp.grad_buffer(logits.id);
                               for (std::size_t k = 0; k < rows.size(); ++k) {
                                 const Index i = rows[k];
                                 buf.row(i) += probs.row(static_cast<Index>(k)) * (g / n);
                                 buf(i, labels[static_cast<std::size_t>(i)]) -= g / n;
                               }
                             });
}

// Row-wise inner products <u_a, v_b> for each pair (a, b); result is p x 1.
template <typename Scalar>
Var<Scalar> pair_dot(Var<Scalar> u, Var<Scalar> v, const std::vector<std::pair<Index, Index>>& pairs) {
  if (u.cols() != v.cols()) throw std::invalid_argument("pair_dot: width mismatch");
  RowMatrix<Scalar> out(static_cast<Index>(pairs.size()), 1);
  for (std::size_t k = 0; k < pairs.size(); ++k)
    out(static_cast<Index>(k), 0) = u.value().row(pairs[k].first).dot(v.value().row(pairs[k].second));
  return u.tape->record(std::move(out), {u, v}, [u, v, pairs](Tape<Scalar>& tp, std::size_t self) {
    const auto& g = tp.upstream(self);
    if (tp.needs_grad(u.id)) {
      auto& gu = tp.grad_buffer(u.id);
      for (std::size_t k = 0; k < pairs.size(); ++k)
        gu.row(pairs[k].first) += g(static_cast<Index>(k), 0) * tp.value(v.id).row(pairs[k].second);
    }
    if (tp.needs_grad(v.id)) {
      auto& gv = tp.grad_buffer(v.id);
      for (std::size_t k = 0; k < pairs.size(); ++k)
        gv.row(pairs[k].second) += g(static_cast<Index>(k), 0) * tp.value(u.id).row(pairs[k].first);
    }
  });
}

// Mean binary cross-entropy of sigmoid(scores) against 0/1 targets, computed stably.
template <typename Scalar>
Var<Scalar> bce_with_logits(Var<Scalar> scores, const std::vector<Scalar>& targets) {
  if (scores.cols() != 1 || scores.rows() != static_cast<Index>(targets.size()) || targets.empty())
    throw std::invalid_argument("bce_with_logits: shape mismatch");
  const auto& x = scores.value();
  Scalar loss = 0;
  for (Index k = 0; k < x.rows(); ++k) {
    const Scalar xi = x(k, 0), y = targets[static_cast<std::size_t>(k)];
    loss += std::max(xi, Scalar(0)) - xi * y + std::log1p(std::exp(-std::abs(xi)));
  }
  const Scalar n = static_cast<Scalar>(targets.size());
  RowMatrix<Scalar> v(1, 1);
  v(0, 0) = loss / n;
  return scores.tape->record(std::move(v), {scores}, [scores, targets, n](Tape<Scalar>& tp, std::size_t self) {
    const Scalar g = tp.upstream(self)(0, 0);
    const auto& x = tp.value(scores.id);
    RowMatrix<Scalar> d(x.rows(), 1);
    for (Index k = 0; k < x.rows(); ++k)
      d(k, 0) = (Scalar(1) / (Scalar(1) + std::exp(-x(k, 0))) - targets[static_cast<std::size_t>(k)]) * g / n;
    tp.accumulate(scores.id, d);
  });
}

}  // namespace hgnas::ad
