#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "mvpi/core.hpp"

namespace mvpi::ad {

// Minimal reverse-mode tape over dense double matrices. Nodes are owned by
// the tape; Var is a cheap (tape, index) handle. Backward closures capture
// node indices, never pointers, so tape growth is safe.
class Tape {
 public:
  struct Var {
    Tape* tape = nullptr;
    std::int64_t index = -1;
  };

  using BackwardFn = std::function<void(Tape&, const Eigen::MatrixXd& upstream)>;

  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    BackwardFn backward;  // empty for leaves
  };

  Var leaf(Eigen::MatrixXd value) { return push(std::move(value), nullptr); }

  Var push(Eigen::MatrixXd value, BackwardFn backward) {
    nodes_.push_back({std::move(value), {}, std::move(backward)});
    return {this, static_cast<std::int64_t>(nodes_.size() - 1)};
  }

  const Eigen::MatrixXd& value(Var v) const { return nodes_[static_cast<std::size_t>(v.index)].value; }
  const Eigen::MatrixXd& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.index)].grad; }
  bool has_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.index)].grad.size() != 0; }

  void accumulate(std::int64_t index, const Eigen::MatrixXd& g) {
    auto& node = nodes_[static_cast<std::size_t>(index)];
    if (node.grad.size() == 0)
      node.grad = g;
    else
      node.grad += g;
  }

  // Seeds the (scalar) root with gradient 1 and walks the tape in reverse
  // build order, which is a valid topological order.
  void backward(Var root) {
    auto& r = nodes_[static_cast<std::size_t>(root.index)];
    if (r.value.size() != 1)
      throw Error(ErrorCode::numeric_failure, "backward root must be a scalar");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    r.grad = Eigen::MatrixXd::Ones(1, 1);
    for (std::int64_t i = root.index; i >= 0; --i) {
      auto& node = nodes_[static_cast<std::size_t>(i)];
      if (node.backward && node.grad.size() != 0) node.backward(*this, node.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }
  void truncate(std::size_t size) { nodes_.resize(size); }

 private:
  std::vector<Node> nodes_;
};

using Var = Tape::Var;

inline const Eigen::MatrixXd& val(Var v) { return v.tape->value(v); }

inline Var add(Var a, Var b) {
  Tape& t = *a.tape;
  auto ai = a.index, bi = b.index;
  return t.push(val(a) + val(b), [ai, bi](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(ai, g);
    t.accumulate(bi, g);
  });
}

inline Var sub(Var a, Var b) {
  Tape& t = *a.tape;
  auto ai = a.index, bi = b.index;
  return t.push(val(a) - val(b), [ai, bi](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(ai, g);
    t.accumulate(bi, -g);
  });
}

inline Var scale(Var a, double s) {
  Tape& t = *a.tape;
  auto ai = a.index;
  return t.push(val(a) * s, [ai, s](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(ai, (g * s).eval());
  });
}

inline Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  if (val(a).cols() != val(b).rows())
    throw Error(ErrorCode::dimension_mismatch, "matmul: inner dimensions differ");
  auto ai = a.index, bi = b.index;
  return t.push(val(a) * val(b), [ai, bi](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(ai, (g * t.value({&t, bi}).transpose()).eval());
    t.accumulate(bi, (t.value({&t, ai}).transpose() * g).eval());
  });
}

// a * b^T without materializing a transpose node.
inline Var matmul_nt(Var a, Var b) {
  Tape& t = *a.tape;
  if (val(a).cols() != val(b).cols())
    throw Error(ErrorCode::dimension_mismatch, "matmul_nt: inner dimensions differ");
  auto ai = a.index, bi = b.index;
  return t.push(val(a) * val(b).transpose(), [ai, bi](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(ai, (g * t.value({&t, bi})).eval());
    t.accumulate(bi, (g.transpose() * t.value({&t, ai})).eval());
  });
}

// Adds a 1 x d row vector to every row of an n x d matrix.
inline Var add_row_broadcast(Var x, Var bias) {
  Tape& t = *x.tape;
  auto xi = x.index, bi = bias.index;
  Eigen::MatrixXd out = val(x);
  out.rowwise() += val(bias).row(0);
  return t.push(std::move(out), [xi, bi](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(xi, g);
    t.accumulate(bi, g.colwise().sum().eval());
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  Tape& t = *parts.front().tape;
  Eigen::Index rows = 0;
  const Eigen::Index cols = val(parts.front()).cols();
  for (Var p : parts) rows += val(p).rows();
  Eigen::MatrixXd out(rows, cols);
  Eigen::Index at = 0;
  std::vector<std::pair<std::int64_t, std::pair<Eigen::Index, Eigen::Index>>> spans;
  for (Var p : parts) {
    const Eigen::Index n = val(p).rows();
    out.middleRows(at, n) = val(p);
    spans.push_back({p.index, {at, n}});
    at += n;
  }
  return t.push(std::move(out), [spans](Tape& t, const Eigen::MatrixXd& g) {
    for (const auto& [idx, span] : spans)
      t.accumulate(idx, g.middleRows(span.first, span.second).eval());
  });
}

inline Var slice_rows(Var x, Eigen::Index start, Eigen::Index count) {
  Tape& t = *x.tape;
  auto xi = x.index;
  const Eigen::Index rows = val(x).rows(), cols = val(x).cols();
  return t.push(val(x).middleRows(start, count),
                [xi, start, count, rows, cols](Tape& t, const Eigen::MatrixXd& g) {
                  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(rows, cols);
                  full.middleRows(start, count) = g;
                  t.accumulate(xi, full);
                });
}

inline Var slice_cols(Var x, Eigen::Index start, Eigen::Index count) {
  Tape& t = *x.tape;
  auto xi = x.index;
  const Eigen::Index rows = val(x).rows(), cols = val(x).cols();
  return t.push(val(x).middleCols(start, count),
                [xi, start, count, rows, cols](Tape& t, const Eigen::MatrixXd& g) {
                  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(rows, cols);
                  full.middleCols(start, count) = g;
                  t.accumulate(xi, full);
                });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  Tape& t = *parts.front().tape;
  const Eigen::Index rows = val(parts.front()).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) cols += val(p).cols();
  Eigen::MatrixXd out(rows, cols);
  Eigen::Index at = 0;
  std::vector<std::pair<std::int64_t, std::pair<Eigen::Index, Eigen::Index>>> spans;
  for (Var p : parts) {
    const Eigen::Index n = val(p).cols();
    out.middleCols(at, n) = val(p);
    spans.push_back({p.index, {at, n}});
    at += n;
  }
  return t.push(std::move(out), [spans](Tape& t, const Eigen::MatrixXd& g) {
    for (const auto& [idx, span] : spans)
      t.accumulate(idx, g.middleCols(span.first, span.second).eval());
  });
}

// Exact GELU, x * Phi(x); smooth, so finite differences stay clean.
inline Var gelu(Var x) {
  Tape& t = *x.tape;
  auto xi = x.index;
  const Eigen::MatrixXd& v = val(x);
  Eigen::MatrixXd out = v.unaryExpr([](double z) { return 0.5 * z * (1.0 + std::erf(z / std::numbers::sqrt2)); });
  return t.push(std::move(out), [xi](Tape& t, const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd& v = t.value({&t, xi});
    Eigen::MatrixXd d = v.unaryExpr([](double z) {
      const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
      return 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2)) + z * phi;
    });
    t.accumulate(xi, (g.array() * d.array()).matrix().eval());
  });
}

// Row-wise layer normalization with learnable gain/bias (1 x d each).
inline Var layernorm_rows(Var x, Var gamma, Var beta, double eps = 1e-5) {
  Tape& t = *x.tape;
  auto xi = x.index, gi = gamma.index, bi = beta.index;
  const Eigen::MatrixXd& v = val(x);
  const Eigen::Index n = v.rows(), d = v.cols();
  Eigen::MatrixXd xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = v.row(r).mean();
    const double var = (v.row(r).array() - mu).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (v.row(r).array() - mu) * inv_std[r];
  }
  Eigen::MatrixXd out = (xhat.array().rowwise() * val(gamma).row(0).array()).rowwise() +
                        val(beta).row(0).array();
  return t.push(std::move(out),
                [xi, gi, bi, xhat, inv_std](Tape& t, const Eigen::MatrixXd& g) {
                  const Eigen::MatrixXd& gamma = t.value({&t, gi});
                  const Eigen::Index n = g.rows(), d = g.cols();
                  Eigen::MatrixXd gx(n, d);
                  for (Eigen::Index r = 0; r < n; ++r) {
                    const auto gh = (g.row(r).array() * gamma.row(0).array()).eval();
                    const double gh_mean = gh.mean();
                    const double ghx_mean = (gh * xhat.row(r).array()).mean();
                    gx.row(r) =
                        (inv_std[r] * (gh - gh_mean - xhat.row(r).array() * ghx_mean)).matrix();
                  }
                  t.accumulate(xi, gx);
                  t.accumulate(gi, (g.array() * xhat.array()).colwise().sum().matrix().eval());
                  t.accumulate(bi, g.colwise().sum().eval());
                });
}

// Row-wise softmax with a boolean keep-mask; dropped positions get exactly
// zero probability and receive no gradient. Every row must keep at least one
// position.
inline Var masked_softmax_rows(Var logits, const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& keep) {
  Tape& t = *logits.tape;
  auto li = logits.index;
  const Eigen::MatrixXd& v = val(logits);
  const Eigen::Index n = v.rows(), m = v.cols();
  if (keep.rows() != n || keep.cols() != m)
    throw Error(ErrorCode::dimension_mismatch, "masked_softmax: mask shape mismatch");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index r = 0; r < n; ++r) {
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < m; ++c)
      if (keep(r, c)) hi = std::max(hi, v(r, c));
    if (!std::isfinite(hi))
      throw Error(ErrorCode::numeric_failure, "masked_softmax: fully masked row");
    double z = 0.0;
    for (Eigen::Index c = 0; c < m; ++c)
      if (keep(r, c)) z += std::exp(v(r, c) - hi);
    for (Eigen::Index c = 0; c < m; ++c)
      if (keep(r, c)) out(r, c) = std::exp(v(r, c) - hi) / z;
  }
  return t.push(out, [li, out](Tape& t, const Eigen::MatrixXd& g) {
    Eigen::MatrixXd gx(out.rows(), out.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double dot = (g.row(r).array() * out.row(r).array()).sum();
      gx.row(r) = (out.row(r).array() * (g.row(r).array() - dot)).matrix();
    }
    t.accumulate(li, gx);
  });
}

// Normalizes each row to unit L2 norm.
inline Var normalize_rows(Var x) {
  Tape& t = *x.tape;
  auto xi = x.index;
  const Eigen::MatrixXd& v = val(x);
  Eigen::VectorXd norms = v.rowwise().norm();
  for (Eigen::Index r = 0; r < norms.size(); ++r)
    if (norms[r] == 0.0) throw Error(ErrorCode::zero_norm, "normalize_rows: zero-norm row");
  Eigen::MatrixXd out = v.array().colwise() / norms.array();
  return t.push(out, [xi, out, norms](Tape& t, const Eigen::MatrixXd& g) {
    Eigen::MatrixXd gx(out.rows(), out.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double dot = (g.row(r).array() * out.row(r).array()).sum();
      gx.row(r) = (g.row(r) - dot * out.row(r)) / norms[r];
    }
    t.accumulate(xi, gx);
  });
}

// Mean over all entries, as a 1x1 scalar.
inline Var mean_all(Var x) {
  Tape& t = *x.tape;
  auto xi = x.index;
  const Eigen::Index rows = val(x).rows(), cols = val(x).cols();
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = val(x).mean();
  return t.push(std::move(out), [xi, rows, cols](Tape& t, const Eigen::MatrixXd& g) {
    const double w = g(0, 0) / static_cast<double>(rows * cols);
    t.accumulate(xi, Eigen::MatrixXd::Constant(rows, cols, w));
  });
}

// Sum over all entries, as a 1x1 scalar.
inline Var sum_all(Var x) {
  Tape& t = *x.tape;
  auto xi = x.index;
  const Eigen::Index rows = val(x).rows(), cols = val(x).cols();
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = val(x).sum();
  return t.push(std::move(out), [xi, rows, cols](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(xi, Eigen::MatrixXd::Constant(rows, cols, g(0, 0)));
  });
}

// Numerically stable multi-label BCE with logits, summed over entries.
// targets is a constant 0/1 matrix of the same shape.
inline Var bce_with_logits_sum(Var logits, const Eigen::MatrixXd& targets) {
  Tape& t = *logits.tape;
  auto li = logits.index;
  const Eigen::MatrixXd& z = val(logits);
  if (z.rows() != targets.rows() || z.cols() != targets.cols())
    throw Error(ErrorCode::dimension_mismatch, "bce: logits/targets shape mismatch");
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r)
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      const double zz = z(r, c), y = targets(r, c);
      // log(1+exp(z)) - y*z, computed stably
      loss += std::max(zz, 0.0) - y * zz + std::log1p(std::exp(-std::abs(zz)));
    }
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = loss;
  return t.push(std::move(out), [li, targets](Tape& t, const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd& z = t.value({&t, li});
    Eigen::MatrixXd gx = z.unaryExpr([](double zz) { return 1.0 / (1.0 + std::exp(-zz)); }) - targets;
    t.accumulate(li, (gx * g(0, 0)).eval());
  });
}

// Cross-entropy of a single row of logits against a class index.
inline Var ce_with_logits(Var logits, Eigen::Index target) {
  Tape& t = *logits.tape;
  auto li = logits.index;
  const Eigen::MatrixXd& z = val(logits);
  if (z.rows() != 1) throw Error(ErrorCode::dimension_mismatch, "ce: expected a single row of logits");
  if (target < 0 || target >= z.cols()) throw Error(ErrorCode::out_of_range, "ce: target out of range");
  const double hi = z.row(0).maxCoeff();
  const double lse = hi + std::log((z.row(0).array() - hi).exp().sum());
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = lse - z(0, target);
  return t.push(std::move(out), [li, target](Tape& t, const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd& z = t.value({&t, li});
    const double hi = z.row(0).maxCoeff();
    Eigen::ArrayXXd p = (z.row(0).array() - hi).exp();
    p /= p.sum();
    Eigen::MatrixXd gx = p.matrix();
    gx(0, target) -= 1.0;
    t.accumulate(li, (gx * g(0, 0)).eval());
  });
}

}  // namespace mvpi::ad
