#pragma once

// Dense f64 tensors with reverse-mode autodiff on an explicit tape.
// A tape instance is single-threaded; tensors without a tape are immutable
// values and safe to share across threads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pcf/errors.hpp"

namespace pcf {

class Tape;

namespace detail {

inline std::string shape_str(const std::vector<size_t>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

inline size_t shape_product(const std::vector<size_t>& s) {
  size_t n = 1;
  for (size_t d : s) n *= d;
  return n;
}

// c[m x n] += a[m x k] * b[k x n]
inline void mm_nn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* bp = b + p * n;
#pragma omp simd
      for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m x k] += a[m x n] * b[k x n]^T
inline void mm_nt(const double* a, const double* b, double* c, size_t m, size_t n, size_t k) {
  for (size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    for (size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
      c[i * k + p] += acc;
    }
  }
}

// c[k x n] += a[m x k]^T * b[m x n]
inline void mm_tn(const double* a, const double* b, double* c, size_t k, size_t m, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* bi = b + i * n;
    for (size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      double* cp = c + p * n;
#pragma omp simd
      for (size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

}  // namespace detail

class Tensor {
public:
  Tensor() = default;

  Tensor(std::vector<size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)),
        data_(std::make_shared<const std::vector<double>>(std::move(data))) {
    if (detail::shape_product(shape_) != data_->size())
      throw Error::dimension("tensor shape " + detail::shape_str(shape_) + " does not match " +
                             std::to_string(data_->size()) + " elements");
  }

  Tensor(std::vector<size_t> shape, std::shared_ptr<const std::vector<double>> data, Tape* tape,
         int node)
      : shape_(std::move(shape)), data_(std::move(data)), tape_(tape), node_(node) {}

  static Tensor zeros(std::vector<size_t> shape) {
    const size_t n = detail::shape_product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
  }
  static Tensor full(std::vector<size_t> shape, double v) {
    const size_t n = detail::shape_product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v));
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const std::vector<size_t>& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t dim(size_t i) const { return shape_.at(i); }
  size_t size() const { return data_ ? data_->size() : 0; }
  bool empty() const { return size() == 0; }

  const std::vector<double>& values() const {
    if (!data_) throw Error::argument("empty tensor");
    return *data_;
  }
  const std::shared_ptr<const std::vector<double>>& data_ptr() const { return data_; }
  double at(size_t i) const { return values().at(i); }
  double value() const {
    if (size() != 1) throw Error::dimension("expected scalar, got " + detail::shape_str(shape_));
    return (*data_)[0];
  }

  bool on_tape() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

  // Same values, detached from any tape.
  Tensor detached() const { return Tensor(shape_, data_, nullptr, -1); }

  const std::vector<double>& grad() const;

private:
  std::vector<size_t> shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

class Tape {
public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a differentiable input (parameter) on the tape.
  Tensor leaf(const Tensor& value) {
    const int id = record(value.size(), nullptr);
    return Tensor(value.shape(), value.data_ptr(), this, id);
  }

  // Internal: appends a node. `backprop` reads grads(id) and accumulates into
  // its parents' buffers; nullptr for leaves.
  int record(size_t out_size, std::function<void(Tape&, int)> backprop) {
    nodes_.push_back(Node{out_size, std::move(backprop)});
    return static_cast<int>(nodes_.size()) - 1;
  }

  void backward(const Tensor& loss) {
    if (loss.tape() != this) throw Error::argument("loss tensor is not on this tape");
    if (loss.size() != 1) throw Error::dimension("backward requires a scalar loss");
    grads_.assign(nodes_.size(), {});
    grads_[static_cast<size_t>(loss.node())] = {1.0};
    for (int id = loss.node(); id >= 0; --id) {
      auto& g = grads_[static_cast<size_t>(id)];
      if (g.empty() || !nodes_[static_cast<size_t>(id)].backprop) continue;
      nodes_[static_cast<size_t>(id)].backprop(*this, id);
    }
    ran_backward_ = true;
  }

  std::vector<double>& grad_buffer(int id, size_t n) {
    auto& g = grads_.at(static_cast<size_t>(id));
    if (g.empty()) g.assign(n, 0.0);
    return g;
  }

  const std::vector<double>& grad(const Tensor& t) {
    if (t.tape() != this) throw Error::argument("tensor is not on this tape");
    if (!ran_backward_) throw Error::argument("backward has not been run");
    return grad_buffer(t.node(), t.size());
  }

  size_t node_count() const { return nodes_.size(); }

private:
  struct Node {
    size_t size;
    std::function<void(Tape&, int)> backprop;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  bool ran_backward_ = false;
};

inline const std::vector<double>& Tensor::grad() const {
  if (!tape_) throw Error::argument("tensor has no tape");
  return tape_->grad(*this);
}

namespace detail {

inline Tape* result_tape(const Tensor& a, const Tensor& b) {
  if (a.on_tape() && b.on_tape() && a.tape() != b.tape())
    throw Error::argument("operands live on different tapes");
  return a.on_tape() ? a.tape() : b.tape();
}

inline void accumulate(std::vector<double>& dst, const std::vector<double>& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

using Data = std::shared_ptr<const std::vector<double>>;

inline Tensor make_result(std::vector<size_t> shape, std::vector<double> data, Tape* tape,
                          std::function<void(Tape&, int)> backprop) {
  auto ptr = std::make_shared<const std::vector<double>>(std::move(data));
  if (!tape) return Tensor(std::move(shape), ptr, nullptr, -1);
  const int id = tape->record(ptr->size(), std::move(backprop));
  return Tensor(std::move(shape), ptr, tape, id);
}

// Elementwise binary op with scalar (1-element) or equal-shape broadcasting.
// fwd(a,b) -> value; da(a,b,g) and db(a,b,g) -> partials times upstream.
template <class F, class Da, class Db>
Tensor binary_elementwise(const char* name, const Tensor& a, const Tensor& b, F fwd, Da da,
                          Db db) {
  const bool a_scalar = a.size() == 1, b_scalar = b.size() == 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape())
    throw Error::dimension(std::string(name) + ": incompatible shapes " + shape_str(a.shape()) +
                           " vs " + shape_str(b.shape()));
  const Tensor& big = a_scalar ? b : a;
  const size_t n = big.size();
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = fwd(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);

  Tape* tape = result_tape(a, b);
  if (!tape) return Tensor(big.shape(), std::move(out));

  const int pa = a.on_tape() ? a.node() : -1;
  const int pb = b.on_tape() ? b.node() : -1;
  Data ad = a.data_ptr(), bd = b.data_ptr();
  const size_t an = a.size(), bn = b.size();
  auto back = [=](Tape& t, int id) {
    const auto& g = t.grad_buffer(id, n);
    if (pa >= 0) {
      auto& ga = t.grad_buffer(pa, an);
      for (size_t i = 0; i < n; ++i)
        ga[a_scalar ? 0 : i] += da((*ad)[a_scalar ? 0 : i], (*bd)[b_scalar ? 0 : i], g[i]);
    }
    if (pb >= 0) {
      auto& gb = t.grad_buffer(pb, bn);
      for (size_t i = 0; i < n; ++i)
        gb[b_scalar ? 0 : i] += db((*ad)[a_scalar ? 0 : i], (*bd)[b_scalar ? 0 : i], g[i]);
    }
  };
  return make_result(big.shape(), std::move(out), tape, back);
}

template <class F, class Dx>
Tensor unary_elementwise(const Tensor& x, F fwd, Dx dx) {
  const size_t n = x.size();
  const auto& xv = x.values();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = fwd(xv[i]);
  if (!x.on_tape()) return Tensor(x.shape(), std::move(out));
  const int px = x.node();
  Data xd = x.data_ptr();
  auto back = [=](Tape& t, int id) {
    const auto& g = t.grad_buffer(id, n);
    auto& gx = t.grad_buffer(px, n);
    for (size_t i = 0; i < n; ++i) gx[i] += dx((*xd)[i], g[i]);
  };
  return make_result(x.shape(), std::move(out), x.tape(), back);
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g) { return g; }, [](double, double, double g) { return g; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g) { return g; }, [](double, double, double g) { return -g; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double g) { return g * y; },
      [](double x, double, double g) { return g * x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double g) { return g / y; },
      [](double x, double y, double g) { return -g * x / (y * y); });
}

inline Tensor relu(const Tensor& x) {
  // relu'(0) = 0
  return detail::unary_elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double g) { return v > 0.0 ? g : 0.0; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary_elementwise(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double v, double g) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return g * s * (1.0 - s);
      });
}

inline Tensor sqrt(const Tensor& x) {
  return detail::unary_elementwise(
      x, [](double v) { return std::sqrt(v); },
      [](double v, double g) { return v > 0.0 ? g * 0.5 / std::sqrt(v) : 0.0; });
}

// x * c for a plain constant.
inline Tensor scale(const Tensor& x, double c) {
  return detail::unary_elementwise(
      x, [c](double v) { return v * c; }, [c](double, double g) { return g * c; });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw Error::dimension("matmul: expected rank-2 operands, got " +
                           detail::shape_str(a.shape()) + " and " + detail::shape_str(b.shape()));
  const size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw Error::dimension("matmul: inner dimensions differ, " + detail::shape_str(a.shape()) +
                           " vs " + detail::shape_str(b.shape()));
  std::vector<double> out(m * n, 0.0);
  detail::mm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);

  Tape* tape = detail::result_tape(a, b);
  if (!tape) return Tensor({m, n}, std::move(out));
  const int pa = a.on_tape() ? a.node() : -1;
  const int pb = b.on_tape() ? b.node() : -1;
  detail::Data ad = a.data_ptr(), bd = b.data_ptr();
  auto back = [=](Tape& t, int id) {
    const auto& g = t.grad_buffer(id, m * n);
    if (pa >= 0) detail::mm_nt(g.data(), bd->data(), t.grad_buffer(pa, m * k).data(), m, n, k);
    if (pb >= 0) detail::mm_tn(ad->data(), g.data(), t.grad_buffer(pb, k * n).data(), k, m, n);
  };
  return detail::make_result({m, n}, std::move(out), tape, back);
}

// x[r x c] + bias[c] broadcast over rows.
inline Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.size() != x.dim(1))
    throw Error::dimension("add_bias: shapes " + detail::shape_str(x.shape()) + " and " +
                           detail::shape_str(bias.shape()));
  const size_t r = x.dim(0), c = x.dim(1);
  const auto& xv = x.values();
  const auto& bv = bias.values();
  std::vector<double> out(r * c);
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] + bv[j];

  Tape* tape = detail::result_tape(x, bias);
  if (!tape) return Tensor({r, c}, std::move(out));
  const int px = x.on_tape() ? x.node() : -1;
  const int pb = bias.on_tape() ? bias.node() : -1;
  auto back = [=](Tape& t, int id) {
    const auto& g = t.grad_buffer(id, r * c);
    if (px >= 0) detail::accumulate(t.grad_buffer(px, r * c), g);
    if (pb >= 0) {
      auto& gb = t.grad_buffer(pb, c);
      for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
    }
  };
  return detail::make_result({r, c}, std::move(out), tape, back);
}

// Per-(group, channel) max over the neighbor axis of [groups x neighbors x
// channels]. Gradient routes to the first index attaining the max.
inline Tensor max_pool_groups(const Tensor& x) {
  if (x.rank() != 3)
    throw Error::dimension("max_pool_groups: expected [groups x neighbors x channels], got " +
                           detail::shape_str(x.shape()));
  const size_t m = x.dim(0), k = x.dim(1), c = x.dim(2);
  if (k == 0) throw Error::dimension("max_pool_groups: empty neighbor axis");
  const auto& xv = x.values();
  std::vector<double> out(m * c);
  auto argmax = std::make_shared<std::vector<size_t>>(m * c);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < c; ++j) {
      size_t best = 0;
      double bv = xv[i * k * c + j];
      for (size_t q = 1; q < k; ++q) {
        const double v = xv[(i * k + q) * c + j];
        if (v > bv) {
          bv = v;
          best = q;
        }
      }
      out[i * c + j] = bv;
      (*argmax)[i * c + j] = best;
    }
  }
  if (!x.on_tape()) return Tensor({m, c}, std::move(out));
  const int px = x.node();
  auto back = [=](Tape& t, int id) {
    const auto& g = t.grad_buffer(id, m * c);
    auto& gx = t.grad_buffer(px, m * k * c);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < c; ++j) gx[(i * k + (*argmax)[i * c + j]) * c + j] += g[i * c + j];
  };
  return detail::make_result({m, c}, std::move(out), x.tape(), back);
}

enum class Reduction { mean, none };

// Binary cross entropy; pred clamped to [eps, 1-eps], eps = 1e-7. Gradients
// flow to pred only; targets must be exactly 0 or 1.
inline Tensor bce(const Tensor& pred, const Tensor& target, Reduction red = Reduction::mean) {
  if (pred.shape() != target.shape())
    throw Error::dimension("bce: shapes " + detail::shape_str(pred.shape()) + " vs " +
                           detail::shape_str(target.shape()));
  constexpr double eps = 1e-7;
  const size_t n = pred.size();
  const auto& pv = pred.values();
  const auto& tv = target.values();
  for (size_t i = 0; i < n; ++i)
    if (tv[i] != 0.0 && tv[i] != 1.0)
      throw Error::validation("bce: target must be 0 or 1, got " + std::to_string(tv[i]));
  std::vector<double> elems(n);
  for (size_t i = 0; i < n; ++i) {
    const double p = std::min(std::max(pv[i], eps), 1.0 - eps);
    elems[i] = -(tv[i] * std::log(p) + (1.0 - tv[i]) * std::log(1.0 - p));
  }
  const bool mean = red == Reduction::mean;
  std::vector<double> out;
  if (mean)
    out = {std::accumulate(elems.begin(), elems.end(), 0.0) / static_cast<double>(n)};
  else
    out = std::move(elems);

  if (!pred.on_tape()) return Tensor(mean ? std::vector<size_t>{1} : pred.shape(), std::move(out));
  const int pp = pred.node();
  detail::Data pd = pred.data_ptr(), td = target.data_ptr();
  auto back = [=](Tape& t, int id) {
    const auto& g = t.grad_buffer(id, mean ? 1 : n);
    auto& gp = t.grad_buffer(pp, n);
    for (size_t i = 0; i < n; ++i) {
      const double p = (*pd)[i];
      if (p <= eps || p >= 1.0 - eps) continue;  // clamped: locally constant
      const double up = mean ? g[0] / static_cast<double>(n) : g[i];
      gp[i] += up * (-(*td)[i] / p + (1.0 - (*td)[i]) / (1.0 - p));
    }
  };
  return detail::make_result(mean ? std::vector<size_t>{1} : pred.shape(), std::move(out),
                             pred.tape(), back);
}

inline Tensor reshape(const Tensor& x, std::vector<size_t> shape) {
  if (detail::shape_product(shape) != x.size())
    throw Error::dimension("reshape: " + detail::shape_str(x.shape()) + " to " +
                           detail::shape_str(shape) + " changes element count");
  if (!x.on_tape()) return Tensor(std::move(shape), x.data_ptr(), nullptr, -1);
  Tape* tape = x.tape();
  const int px = x.node();
  const size_t n = x.size();
  const int id = tape->record(n, [=](Tape& t, int nid) {
    detail::accumulate(t.grad_buffer(px, n), t.grad_buffer(nid, n));
  });
  return Tensor(std::move(shape), x.data_ptr(), tape, id);
}

// Row selection on a rank-2 tensor; backward scatter-adds.
inline Tensor gather_rows(const Tensor& x, const std::vector<size_t>& rows) {
  if (x.rank() != 2)
    throw Error::dimension("gather_rows: expected rank-2, got " + detail::shape_str(x.shape()));
  const size_t n = x.dim(0), c = x.dim(1), m = rows.size();
  const auto& xv = x.values();
  std::vector<double> out(m * c);
  for (size_t i = 0; i < m; ++i) {
    if (rows[i] >= n) throw Error::argument("gather_rows: index out of range");
    const double* src = xv.data() + rows[i] * c;
    std::copy(src, src + c, out.data() + i * c);
  }
  if (!x.on_tape()) return Tensor({m, c}, std::move(out));
  const int px = x.node();
  auto idx = std::make_shared<std::vector<size_t>>(rows);
  auto back = [=](Tape& t, int id) {
    const auto& g = t.grad_buffer(id, m * c);
    auto& gx = t.grad_buffer(px, n * c);
    for (size_t i = 0; i < m; ++i) {
      double* dst = gx.data() + (*idx)[i] * c;
      const double* src = g.data() + i * c;
      for (size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  };
  return detail::make_result({m, c}, std::move(out), x.tape(), back);
}

// Weighted gather: out[i] = sum_j w[i*k+j] * x[idx[i*k+j]], rows of [n x c].
// Weights are plain constants (no gradient).
inline Tensor weighted_rows(const Tensor& x, const std::vector<size_t>& idx,
                            const std::vector<double>& w, size_t groups) {
  if (x.rank() != 2) throw Error::dimension("weighted_rows: expected rank-2 source");
  if (idx.size() != w.size() || groups == 0 || idx.size() % groups != 0)
    throw Error::argument("weighted_rows: index/weight layout mismatch");
  const size_t n = x.dim(0), c = x.dim(1), k = idx.size() / groups;
  const auto& xv = x.values();
  std::vector<double> out(groups * c, 0.0);
  for (size_t i = 0; i < groups; ++i)
    for (size_t j = 0; j < k; ++j) {
      const size_t r = idx[i * k + j];
      if (r >= n) throw Error::argument("weighted_rows: index out of range");
      const double wv = w[i * k + j];
      const double* src = xv.data() + r * c;
      double* dst = out.data() + i * c;
      for (size_t q = 0; q < c; ++q) dst[q] += wv * src[q];
    }
  if (!x.on_tape()) return Tensor({groups, c}, std::move(out));
  const int px = x.node();
  auto si = std::make_shared<std::vector<size_t>>(idx);
  auto sw = std::make_shared<std::vector<double>>(w);
  auto back = [=](Tape& t, int id) {
    const auto& g = t.grad_buffer(id, groups * c);
    auto& gx = t.grad_buffer(px, n * c);
    for (size_t i = 0; i < groups; ++i)
      for (size_t j = 0; j < k; ++j) {
        const size_t r = (*si)[i * k + j];
        const double wv = (*sw)[i * k + j];
        double* dst = gx.data() + r * c;
        const double* src = g.data() + i * c;
        for (size_t q = 0; q < c; ++q) dst[q] += wv * src[q];
      }
  };
  return detail::make_result({groups, c}, std::move(out), x.tape(), back);
}

namespace detail {

inline std::pair<size_t, size_t> rows_cols(const Tensor& t) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw Error::dimension("expected rank-1 or rank-2 tensor, got " + shape_str(t.shape()));
}

}  // namespace detail

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error::argument("concat_cols: no operands");
  const size_t r = detail::rows_cols(parts[0]).first;
  size_t total = 0;
  Tape* tape = nullptr;
  for (const auto& p : parts) {
    auto [pr, pc] = detail::rows_cols(p);
    if (pr != r) throw Error::dimension("concat_cols: row count mismatch");
    total += pc;
    if (p.on_tape()) {
      if (tape && tape != p.tape()) throw Error::argument("operands live on different tapes");
      tape = p.tape();
    }
  }
  std::vector<double> out(r * total);
  size_t off = 0;
  for (const auto& p : parts) {
    const size_t pc = detail::rows_cols(p).second;
    const auto& pv = p.values();
    for (size_t i = 0; i < r; ++i)
      std::copy(pv.data() + i * pc, pv.data() + (i + 1) * pc, out.data() + i * total + off);
    off += pc;
  }
  if (!tape) return Tensor({r, total}, std::move(out));
  struct Part {
    int node;
    size_t cols;
  };
  auto layout = std::make_shared<std::vector<Part>>();
  for (const auto& p : parts)
    layout->push_back({p.on_tape() ? p.node() : -1, detail::rows_cols(p).second});
  auto back = [=](Tape& t, int id) {
    const auto& g = t.grad_buffer(id, r * total);
    size_t o = 0;
    for (const auto& part : *layout) {
      if (part.node >= 0) {
        auto& gp = t.grad_buffer(part.node, r * part.cols);
        for (size_t i = 0; i < r; ++i)
          for (size_t j = 0; j < part.cols; ++j) gp[i * part.cols + j] += g[i * total + o + j];
      }
      o += part.cols;
    }
  };
  return detail::make_result({r, total}, std::move(out), tape, back);
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error::argument("concat_rows: no operands");
  const size_t c = detail::rows_cols(parts[0]).second;
  size_t total = 0;
  Tape* tape = nullptr;
  for (const auto& p : parts) {
    auto [pr, pc] = detail::rows_cols(p);
    if (pc != c) throw Error::dimension("concat_rows: column count mismatch");
    total += pr;
    if (p.on_tape()) {
      if (tape && tape != p.tape()) throw Error::argument("operands live on different tapes");
      tape = p.tape();
    }
  }
  std::vector<double> out;
  out.reserve(total * c);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  if (!tape) return Tensor({total, c}, std::move(out));
  struct Part {
    int node;
    size_t count;
  };
  auto layout = std::make_shared<std::vector<Part>>();
  for (const auto& p : parts) layout->push_back({p.on_tape() ? p.node() : -1, p.size()});
  auto back = [=](Tape& t, int id) {
    const auto& g = t.grad_buffer(id, total * c);
    size_t o = 0;
    for (const auto& part : *layout) {
      if (part.node >= 0) {
        auto& gp = t.grad_buffer(part.node, part.count);
        for (size_t i = 0; i < part.count; ++i) gp[i] += g[o + i];
      }
      o += part.count;
    }
  };
  return detail::make_result({total, c}, std::move(out), tape, back);
}

inline Tensor sum_all(const Tensor& x) {
  const size_t n = x.size();
  const auto& xv = x.values();
  std::vector<double> out = {std::accumulate(xv.begin(), xv.end(), 0.0)};
  if (!x.on_tape()) return Tensor({1}, std::move(out));
  const int px = x.node();
  auto back = [=](Tape& t, int id) {
    const double g = t.grad_buffer(id, 1)[0];
    auto& gx = t.grad_buffer(px, n);
    for (size_t i = 0; i < n; ++i) gx[i] += g;
  };
  return detail::make_result({1}, std::move(out), x.tape(), back);
}

inline Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.size()));
}

// Euclidean norm of each row of [r x c] -> [r].
inline Tensor rowwise_l2(const Tensor& x) {
  if (x.rank() != 2) throw Error::dimension("rowwise_l2: expected rank-2");
  const size_t r = x.dim(0), c = x.dim(1);
  const auto& xv = x.values();
  std::vector<double> out(r);
  for (size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < c; ++j) s += xv[i * c + j] * xv[i * c + j];
    out[i] = std::sqrt(s);
  }
  if (!x.on_tape()) return Tensor({r}, std::move(out));
  const int px = x.node();
  detail::Data xd = x.data_ptr();
  auto norms = std::make_shared<std::vector<double>>(out);
  auto back = [=](Tape& t, int id) {
    const auto& g = t.grad_buffer(id, r);
    auto& gx = t.grad_buffer(px, r * c);
    for (size_t i = 0; i < r; ++i) {
      const double nrm = (*norms)[i];
      if (nrm <= 0.0) continue;
      const double s = g[i] / nrm;
      for (size_t j = 0; j < c; ++j) gx[i * c + j] += s * (*xd)[i * c + j];
    }
  };
  return detail::make_result({r}, std::move(out), x.tape(), back);
}

// Cross product of two 3-element tensors.
inline Tensor cross3(const Tensor& u, const Tensor& v) {
  if (u.size() != 3 || v.size() != 3) throw Error::dimension("cross3: operands must have 3 elements");
  const auto& a = u.values();
  const auto& b = v.values();
  std::vector<double> out = {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
                             a[0] * b[1] - a[1] * b[0]};
  Tape* tape = detail::result_tape(u, v);
  if (!tape) return Tensor(u.shape(), std::move(out));
  const int pu = u.on_tape() ? u.node() : -1;
  const int pv = v.on_tape() ? v.node() : -1;
  detail::Data ud = u.data_ptr(), vd = v.data_ptr();
  auto back = [=](Tape& t, int id) {
    const auto& g = t.grad_buffer(id, 3);
    // d/du (u x v) routes as v x g; d/dv as g x u.
    if (pu >= 0) {
      auto& gu = t.grad_buffer(pu, 3);
      gu[0] += (*vd)[1] * g[2] - (*vd)[2] * g[1];
      gu[1] += (*vd)[2] * g[0] - (*vd)[0] * g[2];
      gu[2] += (*vd)[0] * g[1] - (*vd)[1] * g[0];
    }
    if (pv >= 0) {
      auto& gv = t.grad_buffer(pv, 3);
      gv[0] += g[1] * (*ud)[2] - g[2] * (*ud)[1];
      gv[1] += g[2] * (*ud)[0] - g[0] * (*ud)[2];
      gv[2] += g[0] * (*ud)[1] - g[1] * (*ud)[0];
    }
  };
  return detail::make_result(u.shape(), std::move(out), tape, back);
}

// Minimum of two scalars; gradient routes to the smaller input (ties to a).
inline Tensor min2(const Tensor& a, const Tensor& b) {
  if (a.size() != 1 || b.size() != 1) throw Error::dimension("min2: scalar operands required");
  const bool take_a = a.values()[0] <= b.values()[0];
  std::vector<double> out = {take_a ? a.values()[0] : b.values()[0]};
  Tape* tape = detail::result_tape(a, b);
  if (!tape) return Tensor({1}, std::move(out));
  const int pa = a.on_tape() ? a.node() : -1;
  const int pb = b.on_tape() ? b.node() : -1;
  auto back = [=](Tape& t, int id) {
    const double g = t.grad_buffer(id, 1)[0];
    const int target = take_a ? pa : pb;
    if (target >= 0) t.grad_buffer(target, 1)[0] += g;
  };
  return detail::make_result({1}, std::move(out), tape, back);
}

}  // namespace pcf
