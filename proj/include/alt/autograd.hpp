/* Copyright 2026 The altkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ALT_AUTOGRAD_HPP_
#define ALT_AUTOGRAD_HPP_

#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "alt/array.hpp"
#include "alt/common.hpp"

namespace alt {

class Tape;

// Handle to a node on a tape. Cheap to copy; the tape owns all storage.
struct Var {
  Tape* tape = nullptr;
  std::size_t idx = 0;

  const Array& value() const;
  Array grad() const;
};

// Reverse-mode tape. Nodes are appended in construction order, so reverse
// creation order is a valid reverse topological order and backward() visits
// each node exactly once. One tape per loss graph; not thread-safe.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Array value) {
    nodes_.push_back(Node{std::move(value), Array{}, nullptr});
    return Var{this, nodes_.size() - 1};
  }

  // Appends a node. Callers snapshot size() before calling to learn the
  // index the node will get, so backward closures can read its gradient.
  Var apply(Array value, std::function<void(Tape&)> backward) {
    nodes_.push_back(Node{std::move(value), Array{}, std::move(backward)});
    return Var{this, nodes_.size() - 1};
  }

  const Array& value(std::size_t i) const { return nodes_[i].value; }

  // Gradient accumulator, allocated zero on first touch.
  Array& grad_ref(std::size_t i) {
    Node& n = nodes_[i];
    if (n.grad.data.empty()) n.grad = Array::zeros(n.value.shape);
    return n.grad;
  }

  bool has_grad(std::size_t i) const { return !nodes_[i].grad.data.empty(); }

  Array grad_of(std::size_t i) const {
    const Node& n = nodes_[i];
    if (n.grad.data.empty()) return Array::zeros(n.value.shape);
    return n.grad;
  }

  // Propagates d(root)/d(node) into every node reachable from root.
  // Gradients accumulate; shared subexpressions sum their contributions.
  void backward(const Var& root) {
    if (root.tape != this) throw StateMismatch("backward: var from another tape");
    if (!nodes_[root.idx].value.is_scalar())
      throw NonScalarRoot("backward: root must be scalar, got shape " +
                          Array::shape_str(nodes_[root.idx].value.shape));
    grad_ref(root.idx).data[0] += 1.0;
    for (std::size_t i = root.idx + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.data.empty()) continue;  // no gradient reached this node
      if (n.backward) n.backward(*this);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Array value;
    Array grad;
    std::function<void(Tape&)> backward;
  };
  std::vector<Node> nodes_;
};

inline const Array& Var::value() const { return tape->value(idx); }
inline Array Var::grad() const { return tape->grad_of(idx); }

namespace detail {

inline Tape& tape_of(const Var& a, const Var& b, const char* op) {
  if (a.tape != b.tape) throw StateMismatch(std::string(op) + ": vars from different tapes");
  return *a.tape;
}

// Elementwise binary ops allow equal shapes, or a rank-2 LHS with a rank-1
// RHS broadcast across rows (the leading-batch broadcast). Nothing else.
enum class Bcast { kNone, kRowRhs };

inline Bcast bcast_kind(const Array& a, const Array& b, const char* op) {
  if (a.shape == b.shape) return Bcast::kNone;
  if (a.rank() == 2 && b.rank() == 1 && a.shape[1] == b.shape[0]) return Bcast::kRowRhs;
  throw ShapeMismatch(std::string(op) + ": shapes " + Array::shape_str(a.shape) + " vs " +
                      Array::shape_str(b.shape));
}

// g has the LHS shape; fold it back onto the RHS operand.
inline void accumulate_rhs(Array& db, const Array& g, Bcast k) {
  if (k == Bcast::kNone) {
    for (std::size_t i = 0; i < g.data.size(); ++i) db.data[i] += g.data[i];
  } else {
    int n = g.shape[1];
    for (int r = 0; r < g.shape[0]; ++r)
      for (int c = 0; c < n; ++c) db.at(c) += g.at(r, c);
  }
}

inline double rhs_at(const Array& b, Bcast k, std::size_t flat, int ncols) {
  return k == Bcast::kNone ? b.data[flat] : b.data[flat % static_cast<std::size_t>(ncols)];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a, b, "add");
  const Array& av = a.value();
  const Array& bv = b.value();
  auto k = detail::bcast_kind(av, bv, "add");
  int nc = av.rank() == 2 ? av.shape[1] : static_cast<int>(av.numel());
  Array out = av;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += detail::rhs_at(bv, k, i, nc);
  std::size_t ai = a.idx, bi = b.idx, oi = t.size();
  return t.apply(std::move(out), [ai, bi, oi, k](Tape& tp) {
    const Array g = tp.grad_ref(oi);
    Array& da = tp.grad_ref(ai);
    for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i];
    detail::accumulate_rhs(tp.grad_ref(bi), g, k);
  });
}

inline Var sub(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a, b, "sub");
  const Array& av = a.value();
  const Array& bv = b.value();
  auto k = detail::bcast_kind(av, bv, "sub");
  int nc = av.rank() == 2 ? av.shape[1] : static_cast<int>(av.numel());
  Array out = av;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= detail::rhs_at(bv, k, i, nc);
  std::size_t ai = a.idx, bi = b.idx, oi = t.size();
  return t.apply(std::move(out), [ai, bi, oi, k](Tape& tp) {
    const Array g = tp.grad_ref(oi);
    Array& da = tp.grad_ref(ai);
    for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i];
    Array neg = g;
    for (double& v : neg.data) v = -v;
    detail::accumulate_rhs(tp.grad_ref(bi), neg, k);
  });
}

inline Var mul(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a, b, "mul");
  const Array& av = a.value();
  const Array& bv = b.value();
  auto k = detail::bcast_kind(av, bv, "mul");
  int nc = av.rank() == 2 ? av.shape[1] : static_cast<int>(av.numel());
  Array out = av;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= detail::rhs_at(bv, k, i, nc);
  std::size_t ai = a.idx, bi = b.idx, oi = t.size();
  return t.apply(std::move(out), [ai, bi, oi, k, nc](Tape& tp) {
    const Array g = tp.grad_ref(oi);
    const Array& av2 = tp.value(ai);
    const Array& bv2 = tp.value(bi);
    Array& da = tp.grad_ref(ai);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      da.data[i] += g.data[i] * detail::rhs_at(bv2, k, i, nc);
    Array gb = g;
    for (std::size_t i = 0; i < gb.data.size(); ++i) gb.data[i] *= av2.data[i];
    detail::accumulate_rhs(tp.grad_ref(bi), gb, k);
  });
}

inline Var divide(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a, b, "divide");
  const Array& av = a.value();
  const Array& bv = b.value();
  auto k = detail::bcast_kind(av, bv, "divide");
  int nc = av.rank() == 2 ? av.shape[1] : static_cast<int>(av.numel());
  Array out = av;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] /= detail::rhs_at(bv, k, i, nc);
  std::size_t ai = a.idx, bi = b.idx, oi = t.size();
  return t.apply(std::move(out), [ai, bi, oi, k, nc](Tape& tp) {
    const Array g = tp.grad_ref(oi);
    const Array& av2 = tp.value(ai);
    const Array& bv2 = tp.value(bi);
    Array& da = tp.grad_ref(ai);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      double d = detail::rhs_at(bv2, k, i, nc);
      da.data[i] += g.data[i] / d;
    }
    Array gb = g;
    for (std::size_t i = 0; i < gb.data.size(); ++i) {
      double d = detail::rhs_at(bv2, k, i, nc);
      gb.data[i] *= -av2.data[i] / (d * d);
    }
    detail::accumulate_rhs(tp.grad_ref(bi), gb, k);
  });
}

inline Var scale(const Var& a, double c) {
  Tape& t = *a.tape;
  Array out = a.value();
  for (double& v : out.data) v *= c;
  std::size_t ai = a.idx, oi = t.size();
  return t.apply(std::move(out), [ai, oi, c](Tape& tp) {
    const Array& g = tp.grad_ref(oi);
    Array& da = tp.grad_ref(ai);
    for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += c * g.data[i];
  });
}

inline Var neg(const Var& a) { return scale(a, -1.0); }

// ---------------------------------------------------------------------------
// Unary maps
// ---------------------------------------------------------------------------

namespace detail {

// value map + derivative as a function of (x, y).
template <typename F, typename DF>
inline Var unary(const Var& a, F f, DF df) {
  Tape& t = *a.tape;
  Array out = a.value();
  for (double& v : out.data) v = f(v);
  std::size_t ai = a.idx, oi = t.size();
  return t.apply(std::move(out), [ai, oi, df](Tape& tp) {
    const Array& g = tp.grad_ref(oi);
    const Array& x = tp.value(ai);
    const Array& y = tp.value(oi);
    Array& da = tp.grad_ref(ai);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      da.data[i] += g.data[i] * df(x.data[i], y.data[i]);
  });
}

}  // namespace detail

inline Var tanh_op(const Var& a) {
  return detail::unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(const Var& a) {
  return detail::unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var exp_op(const Var& a) {
  return detail::unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

// log with the configured floor: nonpositive inputs map to kLogFloor with
// zero derivative, keeping forward values finite.
inline Var log_op(const Var& a) {
  return detail::unary(
      a,
      [](double x) { return x > 0.0 ? std::max(std::log(x), kLogFloor) : kLogFloor; },
      [](double x, double) { return x > 0.0 ? 1.0 / x : 0.0; });
}

inline Var sqrt_op(const Var& a) {
  return detail::unary(
      a, [](double x) { return x > 0.0 ? std::sqrt(x) : 0.0; },
      [](double x, double y) { return x > 0.0 ? 0.5 / y : 0.0; });
}

inline Var gelu(const Var& a) {
  constexpr double inv_sqrt2 = 0.7071067811865476;
  constexpr double inv_sqrt2pi = 0.3989422804014327;
  return detail::unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
      [](double x, double) {
        double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
        double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
        return cdf + x * pdf;
      });
}

inline Var leaky_relu(const Var& a, double slope = 0.01) {
  return detail::unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

inline Var reshape(const Var& a, std::vector<int> shape) {
  Tape& t = *a.tape;
  if (Array::numel_of(shape) != a.value().numel())
    throw ShapeMismatch("reshape: numel mismatch " + Array::shape_str(a.value().shape) + " -> " +
                        Array::shape_str(shape));
  Array out(std::move(shape), a.value().data);
  std::size_t ai = a.idx, oi = t.size();
  return t.apply(std::move(out), [ai, oi](Tape& tp) {
    const Array& g = tp.grad_ref(oi);
    Array& da = tp.grad_ref(ai);
    for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i];
  });
}

inline Var transpose(const Var& a) {
  Tape& t = *a.tape;
  const Array& av = a.value();
  if (av.rank() != 2) throw ShapeMismatch("transpose: rank-2 required");
  int m = av.shape[0], n = av.shape[1];
  Array out = Array::zeros({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = av.at(i, j);
  std::size_t ai = a.idx, oi = t.size();
  return t.apply(std::move(out), [ai, oi, m, n](Tape& tp) {
    const Array& g = tp.grad_ref(oi);
    Array& da = tp.grad_ref(ai);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) da.at(i, j) += g.at(j, i);
  });
}

// Half-open [begin, end) along axis. Rank 1 or 2.
inline Var slice(const Var& a, int axis, int begin, int end) {
  Tape& t = *a.tape;
  const Array& av = a.value();
  if (axis < 0 || axis >= av.rank()) throw ShapeMismatch("slice: bad axis");
  if (begin < 0 || end > av.shape[axis] || begin >= end)
    throw ShapeMismatch("slice: bad range [" + std::to_string(begin) + "," + std::to_string(end) +
                        ") on " + Array::shape_str(av.shape));
  Array out;
  if (av.rank() == 1) {
    out = Array::zeros({end - begin});
    for (int i = begin; i < end; ++i) out.at(i - begin) = av.at(i);
  } else if (axis == 0) {
    out = Array::zeros({end - begin, av.shape[1]});
    for (int i = begin; i < end; ++i)
      for (int j = 0; j < av.shape[1]; ++j) out.at(i - begin, j) = av.at(i, j);
  } else {
    out = Array::zeros({av.shape[0], end - begin});
    for (int i = 0; i < av.shape[0]; ++i)
      for (int j = begin; j < end; ++j) out.at(i, j - begin) = av.at(i, j);
  }
  std::size_t ai = a.idx, oi = t.size();
  int rank = av.rank();
  return t.apply(std::move(out), [ai, oi, axis, begin, rank](Tape& tp) {
    const Array& g = tp.grad_ref(oi);
    Array& da = tp.grad_ref(ai);
    if (rank == 1) {
      for (int i = 0; i < g.shape[0]; ++i) da.at(begin + i) += g.at(i);
    } else if (axis == 0) {
      for (int i = 0; i < g.shape[0]; ++i)
        for (int j = 0; j < g.shape[1]; ++j) da.at(begin + i, j) += g.at(i, j);
    } else {
      for (int i = 0; i < g.shape[0]; ++i)
        for (int j = 0; j < g.shape[1]; ++j) da.at(i, begin + j) += g.at(i, j);
    }
  });
}

inline Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeMismatch("concat: no inputs");
  Tape& t = *parts[0].tape;
  int rank = parts[0].value().rank();
  if (rank == 1 && axis != 0) throw ShapeMismatch("concat: rank-1 uses axis 0");
  if (rank == 2 && axis != 0 && axis != 1) throw ShapeMismatch("concat: bad axis");
  for (const Var& p : parts) {
    if (p.tape != &t) throw StateMismatch("concat: vars from different tapes");
    if (p.value().rank() != rank) throw ShapeMismatch("concat: mixed ranks");
  }
  Array out;
  std::vector<int> offsets;
  if (rank == 1) {
    int n = 0;
    for (const Var& p : parts) n += p.value().shape[0];
    out = Array::zeros({n});
    int off = 0;
    for (const Var& p : parts) {
      offsets.push_back(off);
      for (int i = 0; i < p.value().shape[0]; ++i) out.at(off + i) = p.value().at(i);
      off += p.value().shape[0];
    }
  } else if (axis == 0) {
    int cols = parts[0].value().shape[1];
    int rows = 0;
    for (const Var& p : parts) {
      if (p.value().shape[1] != cols) throw ShapeMismatch("concat: column mismatch");
      rows += p.value().shape[0];
    }
    out = Array::zeros({rows, cols});
    int off = 0;
    for (const Var& p : parts) {
      offsets.push_back(off);
      for (int i = 0; i < p.value().shape[0]; ++i)
        for (int j = 0; j < cols; ++j) out.at(off + i, j) = p.value().at(i, j);
      off += p.value().shape[0];
    }
  } else {
    int rows = parts[0].value().shape[0];
    int cols = 0;
    for (const Var& p : parts) {
      if (p.value().shape[0] != rows) throw ShapeMismatch("concat: row mismatch");
      cols += p.value().shape[1];
    }
    out = Array::zeros({rows, cols});
    int off = 0;
    for (const Var& p : parts) {
      offsets.push_back(off);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < p.value().shape[1]; ++j) out.at(i, off + j) = p.value().at(i, j);
      off += p.value().shape[1];
    }
  }
  std::vector<std::size_t> srcs;
  for (const Var& p : parts) srcs.push_back(p.idx);
  std::size_t oi = t.size();
  return t.apply(std::move(out), [srcs, offsets, oi, axis, rank](Tape& tp) {
    const Array& g = tp.grad_ref(oi);
    for (std::size_t p = 0; p < srcs.size(); ++p) {
      Array& da = tp.grad_ref(srcs[p]);
      int off = offsets[p];
      if (rank == 1) {
        for (int i = 0; i < da.shape[0]; ++i) da.at(i) += g.at(off + i);
      } else if (axis == 0) {
        for (int i = 0; i < da.shape[0]; ++i)
          for (int j = 0; j < da.shape[1]; ++j) da.at(i, j) += g.at(off + i, j);
      } else {
        for (int i = 0; i < da.shape[0]; ++i)
          for (int j = 0; j < da.shape[1]; ++j) da.at(i, j) += g.at(i, off + j);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

// (m,k)x(k,n) -> (m,n); (k)x(k,n) -> (n); (m,k)x(k) -> (m).
inline Var matmul(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a, b, "matmul");
  const Array& av = a.value();
  const Array& bv = b.value();
  int ar = av.rank(), br = bv.rank();
  Array out;
  if (ar == 2 && br == 2) {
    if (av.shape[1] != bv.shape[0])
      throw ShapeMismatch("matmul: " + Array::shape_str(av.shape) + " x " +
                          Array::shape_str(bv.shape));
    int m = av.shape[0], k = av.shape[1], n = bv.shape[1];
    out = Array::zeros({m, n});
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < k; ++p) {
        double aip = av.at(i, p);
        if (aip == 0.0) continue;
        const double* brow = bv.row(p);
        double* orow = out.row(i);
        for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
      }
    }
  } else if (ar == 1 && br == 2) {
    if (av.shape[0] != bv.shape[0])
      throw ShapeMismatch("matmul: " + Array::shape_str(av.shape) + " x " +
                          Array::shape_str(bv.shape));
    int k = av.shape[0], n = bv.shape[1];
    out = Array::zeros({n});
    for (int p = 0; p < k; ++p) {
      double ap = av.at(p);
      if (ap == 0.0) continue;
      const double* brow = bv.row(p);
      for (int j = 0; j < n; ++j) out.at(j) += ap * brow[j];
    }
  } else if (ar == 2 && br == 1) {
    if (av.shape[1] != bv.shape[0])
      throw ShapeMismatch("matmul: " + Array::shape_str(av.shape) + " x " +
                          Array::shape_str(bv.shape));
    int m = av.shape[0], k = av.shape[1];
    out = Array::zeros({m});
    for (int i = 0; i < m; ++i) {
      const double* arow = av.row(i);
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * bv.at(p);
      out.at(i) = acc;
    }
  } else {
    throw ShapeMismatch("matmul: unsupported ranks");
  }
  std::size_t ai = a.idx, bi = b.idx, oi = t.size();
  return t.apply(std::move(out), [ai, bi, oi, ar, br](Tape& tp) {
    const Array g = tp.grad_ref(oi);
    const Array& av2 = tp.value(ai);
    const Array& bv2 = tp.value(bi);
    Array& da = tp.grad_ref(ai);
    Array& db = tp.grad_ref(bi);
    if (ar == 2 && br == 2) {
      int m = av2.shape[0], k = av2.shape[1], n = bv2.shape[1];
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          const double* grow = g.row(i);
          const double* brow = bv2.row(p);
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
          da.at(i, p) += acc;
        }
      for (int p = 0; p < k; ++p)
        for (int i = 0; i < m; ++i) {
          double aip = av2.at(i, p);
          if (aip == 0.0) continue;
          const double* grow = g.row(i);
          double* dbrow = db.row(p);
          for (int j = 0; j < n; ++j) dbrow[j] += aip * grow[j];
        }
    } else if (ar == 1 && br == 2) {
      int k = av2.shape[0], n = bv2.shape[1];
      for (int p = 0; p < k; ++p) {
        const double* brow = bv2.row(p);
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += g.at(j) * brow[j];
        da.at(p) += acc;
        double ap = av2.at(p);
        double* dbrow = db.row(p);
        for (int j = 0; j < n; ++j) dbrow[j] += ap * g.at(j);
      }
    } else {
      int m = av2.shape[0], k = av2.shape[1];
      for (int i = 0; i < m; ++i) {
        double gi = g.at(i);
        const double* arow = av2.row(i);
        double* darow = da.row(i);
        for (int p = 0; p < k; ++p) {
          darow[p] += gi * bv2.at(p);
          db.at(p) += gi * arow[p];
        }
      }
    }
  });
}

inline Var linear(const Var& x, const Var& w, const Var& b) {
  return add(matmul(x, w), b);
}

inline Var dot(const Var& a, const Var& b);  // defined after sum()

// 1-D convolution, valid with optional symmetric zero padding.
// x: (C_in, L), w: (C_out, C_in, K), bias: optional (C_out).
// out: (C_out, L_out) with L_out = floor((L + 2*pad - K)/stride) + 1.
inline Var conv1d(const Var& x, const Var& w, const std::optional<Var>& bias, int stride,
                  int pad = 0) {
  Tape& t = detail::tape_of(x, w, "conv1d");
  const Array& xv = x.value();
  const Array& wv = w.value();
  if (xv.rank() != 2 || wv.rank() != 3 || wv.shape[1] != xv.shape[0])
    throw ShapeMismatch("conv1d: x " + Array::shape_str(xv.shape) + " w " +
                        Array::shape_str(wv.shape));
  if (stride < 1 || pad < 0) throw ShapeMismatch("conv1d: bad stride/pad");
  int cin = xv.shape[0], len = xv.shape[1];
  int cout = wv.shape[0], k = wv.shape[2];
  int lout = (len + 2 * pad - k) / stride + 1;
  if (len + 2 * pad < k) throw ShapeMismatch("conv1d: input shorter than kernel");
  auto wat = [&](const Array& ww, int co, int ci, int kk) {
    return ww.data[(static_cast<std::size_t>(co) * ww.shape[1] + ci) * ww.shape[2] + kk];
  };
  Array out = Array::zeros({cout, lout});
  for (int co = 0; co < cout; ++co) {
    for (int ti = 0; ti < lout; ++ti) {
      double acc = 0.0;
      for (int ci = 0; ci < cin; ++ci)
        for (int kk = 0; kk < k; ++kk) {
          int src = ti * stride + kk - pad;
          if (src < 0 || src >= len) continue;
          acc += wat(wv, co, ci, kk) * xv.at(ci, src);
        }
      out.at(co, ti) = acc;
    }
  }
  if (bias) {
    const Array& bv = bias->value();
    if (bv.rank() != 1 || bv.shape[0] != cout) throw ShapeMismatch("conv1d: bias shape");
    for (int co = 0; co < cout; ++co)
      for (int ti = 0; ti < lout; ++ti) out.at(co, ti) += bv.at(co);
  }
  std::size_t xi = x.idx, wi = w.idx, oi = t.size();
  bool has_bias = bias.has_value();
  std::size_t bidx = has_bias ? bias->idx : 0;
  return t.apply(std::move(out),
                 [xi, wi, oi, bidx, has_bias, stride, pad, cin, len, cout, k](Tape& tp) {
    const Array& g = tp.grad_ref(oi);
    const Array& xv2 = tp.value(xi);
    const Array& wv2 = tp.value(wi);
    Array& dx = tp.grad_ref(xi);
    Array& dw = tp.grad_ref(wi);
    int lout = g.shape[1];
    auto wflat = [&](int co, int ci, int kk) {
      return (static_cast<std::size_t>(co) * cin + ci) * static_cast<std::size_t>(k) + kk;
    };
    for (int co = 0; co < cout; ++co) {
      for (int ti = 0; ti < lout; ++ti) {
        double gv = g.at(co, ti);
        if (gv == 0.0) continue;
        for (int ci = 0; ci < cin; ++ci)
          for (int kk = 0; kk < k; ++kk) {
            int src = ti * stride + kk - pad;
            if (src < 0 || src >= len) continue;
            dx.at(ci, src) += gv * wv2.data[wflat(co, ci, kk)];
            dw.data[wflat(co, ci, kk)] += gv * xv2.at(ci, src);
          }
      }
    }
    if (has_bias) {
      Array& db = tp.grad_ref(bidx);
      for (int co = 0; co < cout; ++co)
        for (int ti = 0; ti < lout; ++ti) db.at(co) += g.at(co, ti);
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions and normalizations
// ---------------------------------------------------------------------------

inline Var sum(const Var& a) {
  Tape& t = *a.tape;
  double acc = 0.0;
  for (double v : a.value().data) acc += v;
  std::size_t ai = a.idx, oi = t.size();
  return t.apply(Array::scalar(acc), [ai, oi](Tape& tp) {
    double g = tp.grad_ref(oi).data[0];
    Array& da = tp.grad_ref(ai);
    for (double& v : da.data) v += g;
  });
}

inline Var mean(const Var& a) {
  Tape& t = *a.tape;
  const Array& av = a.value();
  if (av.numel() == 0) throw ShapeMismatch("mean: empty input");
  double acc = 0.0;
  for (double v : av.data) acc += v;
  double inv = 1.0 / static_cast<double>(av.numel());
  std::size_t ai = a.idx, oi = t.size();
  return t.apply(Array::scalar(acc * inv), [ai, oi, inv](Tape& tp) {
    double g = tp.grad_ref(oi).data[0] * inv;
    Array& da = tp.grad_ref(ai);
    for (double& v : da.data) v += g;
  });
}

inline Var dot(const Var& a, const Var& b) { return sum(mul(a, b)); }

namespace detail {

inline void rows_of(const Array& a, int& nrows, int& ncols) {
  if (a.rank() == 1) {
    nrows = 1;
    ncols = a.shape[0];
  } else if (a.rank() == 2) {
    nrows = a.shape[0];
    ncols = a.shape[1];
  } else {
    throw ShapeMismatch("rowwise op: rank 1 or 2 required");
  }
}

inline double row_logsumexp(const double* x, int n) {
  double mx = kLogFloor;
  for (int i = 0; i < n; ++i) mx = std::max(mx, x[i]);
  if (mx <= kLogFloor) return kLogFloor;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::exp(x[i] - mx);
  return mx + std::log(acc);
}

}  // namespace detail

// Rowwise softmax over the last dimension.
inline Var softmax(const Var& a) {
  Tape& t = *a.tape;
  const Array& av = a.value();
  int nr, nc;
  detail::rows_of(av, nr, nc);
  Array out = av;
  for (int r = 0; r < nr; ++r) {
    double* orow = out.data.data() + static_cast<std::size_t>(r) * nc;
    double lse = detail::row_logsumexp(orow, nc);
    for (int c = 0; c < nc; ++c) orow[c] = std::exp(orow[c] - lse);
  }
  std::size_t ai = a.idx, oi = t.size();
  return t.apply(std::move(out), [ai, oi, nr, nc](Tape& tp) {
    const Array& g = tp.grad_ref(oi);
    const Array& y = tp.value(oi);
    Array& da = tp.grad_ref(ai);
    for (int r = 0; r < nr; ++r) {
      const double* grow = g.data.data() + static_cast<std::size_t>(r) * nc;
      const double* yrow = y.data.data() + static_cast<std::size_t>(r) * nc;
      double* darow = da.data.data() + static_cast<std::size_t>(r) * nc;
      double gy = 0.0;
      for (int c = 0; c < nc; ++c) gy += grow[c] * yrow[c];
      for (int c = 0; c < nc; ++c) darow[c] += yrow[c] * (grow[c] - gy);
    }
  });
}

// Rowwise log-softmax over the last dimension.
inline Var log_softmax(const Var& a) {
  Tape& t = *a.tape;
  const Array& av = a.value();
  int nr, nc;
  detail::rows_of(av, nr, nc);
  Array out = av;
  for (int r = 0; r < nr; ++r) {
    double* orow = out.data.data() + static_cast<std::size_t>(r) * nc;
    double lse = detail::row_logsumexp(orow, nc);
    for (int c = 0; c < nc; ++c) orow[c] = std::max(orow[c] - lse, kLogFloor);
  }
  std::size_t ai = a.idx, oi = t.size();
  return t.apply(std::move(out), [ai, oi, nr, nc](Tape& tp) {
    const Array& g = tp.grad_ref(oi);
    const Array& y = tp.value(oi);
    Array& da = tp.grad_ref(ai);
    for (int r = 0; r < nr; ++r) {
      const double* grow = g.data.data() + static_cast<std::size_t>(r) * nc;
      const double* yrow = y.data.data() + static_cast<std::size_t>(r) * nc;
      double* darow = da.data.data() + static_cast<std::size_t>(r) * nc;
      double gsum = 0.0;
      for (int c = 0; c < nc; ++c) gsum += grow[c];
      for (int c = 0; c < nc; ++c) darow[c] += grow[c] - std::exp(yrow[c]) * gsum;
    }
  });
}

// Rowwise logsumexp. Rank 1 -> scalar, rank 2 -> (rows).
inline Var logsumexp(const Var& a) {
  Tape& t = *a.tape;
  const Array& av = a.value();
  int nr, nc;
  detail::rows_of(av, nr, nc);
  Array out = av.rank() == 1 ? Array::zeros({1}) : Array::zeros({nr});
  for (int r = 0; r < nr; ++r)
    out.at(r) = detail::row_logsumexp(av.data.data() + static_cast<std::size_t>(r) * nc, nc);
  std::size_t ai = a.idx, oi = t.size();
  return t.apply(std::move(out), [ai, oi, nr, nc](Tape& tp) {
    const Array& g = tp.grad_ref(oi);
    const Array& x = tp.value(ai);
    const Array& y = tp.value(oi);
    Array& da = tp.grad_ref(ai);
    for (int r = 0; r < nr; ++r) {
      const double* xrow = x.data.data() + static_cast<std::size_t>(r) * nc;
      double* darow = da.data.data() + static_cast<std::size_t>(r) * nc;
      for (int c = 0; c < nc; ++c) darow[c] += g.at(r) * std::exp(xrow[c] - y.at(r));
    }
  });
}

// Rowwise layer normalization with learned gain and bias over the last dim.
inline Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5) {
  Tape& t = *x.tape;
  const Array& xv = x.value();
  int nr, nc;
  detail::rows_of(xv, nr, nc);
  const Array& gv = gain.value();
  const Array& bv = bias.value();
  if (gv.rank() != 1 || gv.shape[0] != nc || bv.rank() != 1 || bv.shape[0] != nc)
    throw ShapeMismatch("layer_norm: gain/bias must be rank-1 of width " + std::to_string(nc));
  Array out = xv;
  std::vector<double> inv_std(nr), means(nr);
  for (int r = 0; r < nr; ++r) {
    double* row = out.data.data() + static_cast<std::size_t>(r) * nc;
    double mu = 0.0;
    for (int c = 0; c < nc; ++c) mu += row[c];
    mu /= nc;
    double var = 0.0;
    for (int c = 0; c < nc; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= nc;
    double is = 1.0 / std::sqrt(var + eps);
    means[r] = mu;
    inv_std[r] = is;
    for (int c = 0; c < nc; ++c) row[c] = gv.at(c) * ((row[c] - mu) * is) + bv.at(c);
  }
  std::size_t xi = x.idx, gi = gain.idx, bi = bias.idx, oi = t.size();
  return t.apply(std::move(out), [xi, gi, bi, oi, nr, nc, means, inv_std](Tape& tp) {
    const Array& g = tp.grad_ref(oi);
    const Array& xv2 = tp.value(xi);
    const Array& gv2 = tp.value(gi);
    Array& dx = tp.grad_ref(xi);
    Array& dgain = tp.grad_ref(gi);
    Array& dbias = tp.grad_ref(bi);
    for (int r = 0; r < nr; ++r) {
      const double* xrow = xv2.data.data() + static_cast<std::size_t>(r) * nc;
      const double* grow = g.data.data() + static_cast<std::size_t>(r) * nc;
      double* dxrow = dx.data.data() + static_cast<std::size_t>(r) * nc;
      double mu = means[r], is = inv_std[r];
      // xhat = (x - mu) * is ; dxhat = g * gain
      double m1 = 0.0, m2 = 0.0;
      for (int c = 0; c < nc; ++c) {
        double xhat = (xrow[c] - mu) * is;
        double dxh = grow[c] * gv2.at(c);
        m1 += dxh;
        m2 += dxh * xhat;
        dgain.at(c) += grow[c] * xhat;
        dbias.at(c) += grow[c];
      }
      m1 /= nc;
      m2 /= nc;
      for (int c = 0; c < nc; ++c) {
        double xhat = (xrow[c] - mu) * is;
        double dxh = grow[c] * gv2.at(c);
        dxrow[c] += is * (dxh - m1 - xhat * m2);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Lookup and masking
// ---------------------------------------------------------------------------

// table: (K, D), ids in [0, K). out: (|ids|, D).
inline Var embedding_lookup(const Var& table, const std::vector<int>& ids) {
  Tape& t = *table.tape;
  const Array& tv = table.value();
  if (tv.rank() != 2) throw ShapeMismatch("embedding_lookup: table must be rank 2");
  int k = tv.shape[0], d = tv.shape[1];
  for (int id : ids)
    if (id < 0 || id >= k) throw InvalidId("embedding_lookup: id " + std::to_string(id));
  Array out = Array::zeros({static_cast<int>(ids.size()), d});
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (int j = 0; j < d; ++j) out.at(static_cast<int>(i), j) = tv.at(ids[i], j);
  std::size_t ti = table.idx, oi = t.size();
  return t.apply(std::move(out), [ti, oi, ids, d](Tape& tp) {
    const Array& g = tp.grad_ref(oi);
    Array& dt = tp.grad_ref(ti);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < d; ++j) dt.at(ids[i], j) += g.at(static_cast<int>(i), j);
  });
}

// Replaces masked rows of z (T, D) with a trainable embedding (D).
// Unmasked rows pass through bit-identically.
inline Var mask_rows(const Var& z, const std::vector<bool>& mask, const Var& embedding) {
  Tape& t = detail::tape_of(z, embedding, "mask_rows");
  const Array& zv = z.value();
  const Array& ev = embedding.value();
  if (zv.rank() != 2) throw ShapeMismatch("mask_rows: z must be rank 2");
  if (static_cast<int>(mask.size()) != zv.shape[0])
    throw LengthMismatch("mask_rows: mask length " + std::to_string(mask.size()) + " vs T " +
                         std::to_string(zv.shape[0]));
  if (ev.rank() != 1 || ev.shape[0] != zv.shape[1])
    throw ShapeMismatch("mask_rows: embedding width");
  Array out = zv;
  for (int r = 0; r < zv.shape[0]; ++r)
    if (mask[r])
      for (int c = 0; c < zv.shape[1]; ++c) out.at(r, c) = ev.at(c);
  std::size_t zi = z.idx, ei = embedding.idx, oi = t.size();
  return t.apply(std::move(out), [zi, ei, oi, mask](Tape& tp) {
    const Array& g = tp.grad_ref(oi);
    Array& dz = tp.grad_ref(zi);
    Array& de = tp.grad_ref(ei);
    for (int r = 0; r < g.shape[0]; ++r) {
      if (mask[r]) {
        for (int c = 0; c < g.shape[1]; ++c) de.at(c) += g.at(r, c);
      } else {
        for (int c = 0; c < g.shape[1]; ++c) dz.at(r, c) += g.at(r, c);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Recurrent cells (composites; reverse rules come from the primitives)
// ---------------------------------------------------------------------------

// GRU cell. x: (I), h: (H), w_x: (I, 3H), w_h: (H, 3H), b: (3H).
// Gate packing along the 3H axis is [reset | update | candidate].
inline Var gru_cell(const Var& x, const Var& h, const Var& w_x, const Var& w_h, const Var& b) {
  int hdim = h.value().shape[0];
  Var xs = matmul(x, w_x);                 // (3H)
  Var hs = matmul(h, w_h);                 // (3H)
  Var pre = add(xs, b);
  Var r = sigmoid(add(slice(pre, 0, 0, hdim), slice(hs, 0, 0, hdim)));
  Var zg = sigmoid(add(slice(pre, 0, hdim, 2 * hdim), slice(hs, 0, hdim, 2 * hdim)));
  Var n = tanh_op(add(slice(pre, 0, 2 * hdim, 3 * hdim),
                      mul(r, slice(hs, 0, 2 * hdim, 3 * hdim))));
  // h' = (1 - z) * n + z * h
  Var one = x.tape->leaf(Array::full({hdim}, 1.0));
  return add(mul(sub(one, zg), n), mul(zg, h));
}

// LSTM cell. x: (I), h/c: (H), w_x: (I, 4H), w_h: (H, 4H), b: (4H).
// Gate packing along the 4H axis is [input | forget | cell | output].
struct LstmOut {
  Var h;
  Var c;
};

inline LstmOut lstm_cell(const Var& x, const Var& h, const Var& c, const Var& w_x,
                         const Var& w_h, const Var& b) {
  int hdim = h.value().shape[0];
  Var pre = add(add(matmul(x, w_x), matmul(h, w_h)), b);
  Var ig = sigmoid(slice(pre, 0, 0, hdim));
  Var fg = sigmoid(slice(pre, 0, hdim, 2 * hdim));
  Var gg = tanh_op(slice(pre, 0, 2 * hdim, 3 * hdim));
  Var og = sigmoid(slice(pre, 0, 3 * hdim, 4 * hdim));
  Var c_new = add(mul(fg, c), mul(ig, gg));
  Var h_new = mul(og, tanh_op(c_new));
  return {h_new, c_new};
}

}  // namespace alt

#endif  // ALT_AUTOGRAD_HPP_
