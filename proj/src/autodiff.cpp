#include "bitseq/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bitseq {

namespace detail {

void mm_nn_acc(float* c, const float* a, const float* b, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<size_t>(i) * k;
    float* crow = c + static_cast<size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const float av = arow[kk];
      const float* brow = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void mm_nt_acc(float* c, const float* a, const float* b, int m, int k, int n) {
  // c[i,j] += dot(a[i,:], b[j,:]); a is m x k, b is n x k
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<size_t>(i) * k;
    float* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const float* brow = b + static_cast<size_t>(j) * k;
      float acc = 0.0f;
      for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      crow[j] += acc;
    }
  }
}

void mm_tn_acc(float* c, const float* a, const float* b, int m, int k, int n) {
  // c[i,j] += sum_kk a[kk,i] * b[kk,j]; a is k x m, b is k x n
  for (int kk = 0; kk < k; ++kk) {
    const float* arow = a + static_cast<size_t>(kk) * m;
    const float* brow = b + static_cast<size_t>(kk) * n;
    for (int i = 0; i < m; ++i) {
      const float av = arow[i];
      float* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void check_finite([[maybe_unused]] const Tensor& t, [[maybe_unused]] const char* op) {
#ifndef NDEBUG
  for (float v : t.vec()) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string("non-finite value produced by op ") + op);
    }
  }
#endif
}

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  auto fmt = [](const Tensor& t) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < t.shape().size(); ++i) {
      if (i) os << "x";
      os << t.shape()[i];
    }
    os << "]";
    return os.str();
  };
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + fmt(a) + " and " +
                              fmt(b));
}

int record(Tape* tape, Tensor& out, std::function<void(Tape&, const std::vector<float>&)> bwd) {
  if (!tape) return -1;
  out.node = tape->push(out.numel(), std::move(bwd));
  return out.node;
}

// Adds src into the grad buffer of `node` (no-op for constants).
void accum(Tape& tape, int node, const std::vector<float>& src) {
  if (node < 0) return;
  auto& g = tape.grad_buffer(node);
  for (size_t i = 0; i < src.size(); ++i) g[i] += src[i];
}

[[maybe_unused]] bool any_tracked(const Tensor& a) { return a.tracked(); }
bool any_tracked(const Tensor& a, const Tensor& b) { return a.tracked() || b.tracked(); }

}  // namespace
}  // namespace detail

using detail::accum;
using detail::record;
using detail::shape_error;

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tensor Tape::leaf(const ParamPtr& p) {
  Tensor t = p->value;
  ParamPtr held = p;
  t.node = push(t.numel(), [held](Tape&, const std::vector<float>& gout) {
    auto& g = held->grad.vec();
    for (size_t i = 0; i < gout.size(); ++i) g[i] += gout[i];
  });
  return t;
}

int Tape::push(std::int64_t numel, std::function<void(Tape&, const std::vector<float>&)> bwd) {
  Node n;
  n.numel = numel;
  n.backward = std::move(bwd);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be a scalar");
  backward_with_seed(loss, {1.0f});
}

void Tape::backward_with_seed(const Tensor& out, const std::vector<float>& seed) {
  if (!out.tracked()) throw std::invalid_argument("backward: tensor is not on the tape");
  if (static_cast<std::int64_t>(seed.size()) != out.numel())
    throw std::invalid_argument("backward: seed shape mismatch");
  for (auto& n : nodes_) {
    n.grad.assign(static_cast<size_t>(n.numel), 0.0f);
  }
  nodes_[static_cast<size_t>(out.node)].grad = seed;
  for (int i = out.node; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.backward) n.backward(*this, n.grad);
  }
}

void Tape::reset() { nodes_.clear(); }

const std::vector<float>& Tape::grad_of(const Tensor& t) const {
  if (!t.tracked()) throw std::invalid_argument("grad_of: tensor is not on the tape");
  return nodes_[static_cast<size_t>(t.node)].grad;
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows()) shape_error("matmul", a, b);
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor y({m, n});
  detail::mm_nn_acc(y.data(), a.data(), b.data(), m, k, n);
  detail::check_finite(y, "matmul");
  if (tape && detail::any_tracked(a, b)) {
    Tensor av = a, bv = b;
    record(tape, y, [av, bv, m, k, n](Tape& t, const std::vector<float>& gout) {
      if (av.tracked()) {
        std::vector<float> da(static_cast<size_t>(m) * k, 0.0f);
        detail::mm_nt_acc(da.data(), gout.data(), bv.data(), m, n, k);  // dA = dY * B^T
        accum(t, av.node, da);
      }
      if (bv.tracked()) {
        std::vector<float> db(static_cast<size_t>(k) * n, 0.0f);
        detail::mm_tn_acc(db.data(), av.data(), gout.data(), k, m, n);  // dB = A^T * dY
        accum(t, bv.node, db);
      }
    });
  }
  return y;
}

Tensor matmul_nt(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.cols()) shape_error("matmul_nt", a, b);
  const int m = a.rows(), k = a.cols(), n = b.rows();
  Tensor y({m, n});
  detail::mm_nt_acc(y.data(), a.data(), b.data(), m, k, n);
  detail::check_finite(y, "matmul_nt");
  if (tape && detail::any_tracked(a, b)) {
    Tensor av = a, bv = b;
    record(tape, y, [av, bv, m, k, n](Tape& t, const std::vector<float>& gout) {
      if (av.tracked()) {
        std::vector<float> da(static_cast<size_t>(m) * k, 0.0f);
        detail::mm_nn_acc(da.data(), gout.data(), bv.data(), m, n, k);  // dA = dY * B
        accum(t, av.node, da);
      }
      if (bv.tracked()) {
        std::vector<float> db(static_cast<size_t>(n) * k, 0.0f);
        detail::mm_tn_acc(db.data(), gout.data(), av.data(), n, m, k);  // dB = dY^T * A
        accum(t, bv.node, db);
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Elementwise / broadcast arithmetic
// ---------------------------------------------------------------------------

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("add", a, b);
  Tensor y(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) y.at(static_cast<int>(i)) = a.at(static_cast<int>(i)) + b.at(static_cast<int>(i));
  detail::check_finite(y, "add");
  if (tape && detail::any_tracked(a, b)) {
    const int an = a.node, bn = b.node;
    record(tape, y, [an, bn](Tape& t, const std::vector<float>& gout) {
      accum(t, an, gout);
      accum(t, bn, gout);
    });
  }
  return y;
}

Tensor add_rowvec(Tape* tape, const Tensor& x, const Tensor& v) {
  if (x.ndim() != 2 || v.numel() != x.cols()) shape_error("add_rowvec", x, v);
  const int m = x.rows(), n = x.cols();
  Tensor y({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) y.at(i, j) = x.at(i, j) + v.at(j);
  detail::check_finite(y, "add_rowvec");
  if (tape && detail::any_tracked(x, v)) {
    const int xn = x.node, vn = v.node;
    record(tape, y, [xn, vn, m, n](Tape& t, const std::vector<float>& gout) {
      accum(t, xn, gout);
      if (vn >= 0) {
        auto& gv = t.grad_buffer(vn);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) gv[static_cast<size_t>(j)] += gout[static_cast<size_t>(i) * n + j];
      }
    });
  }
  return y;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a, b);
  Tensor y(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) y.at(static_cast<int>(i)) = a.at(static_cast<int>(i)) * b.at(static_cast<int>(i));
  detail::check_finite(y, "mul");
  if (tape && detail::any_tracked(a, b)) {
    Tensor av = a, bv = b;
    record(tape, y, [av, bv](Tape& t, const std::vector<float>& gout) {
      if (av.tracked()) {
        auto& g = t.grad_buffer(av.node);
        for (size_t i = 0; i < gout.size(); ++i) g[i] += gout[i] * bv.data()[i];
      }
      if (bv.tracked()) {
        auto& g = t.grad_buffer(bv.node);
        for (size_t i = 0; i < gout.size(); ++i) g[i] += gout[i] * av.data()[i];
      }
    });
  }
  return y;
}

Tensor mul_rowvec(Tape* tape, const Tensor& x, const Tensor& v) {
  if (x.ndim() != 2 || v.numel() != x.cols()) shape_error("mul_rowvec", x, v);
  const int m = x.rows(), n = x.cols();
  Tensor y({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) y.at(i, j) = x.at(i, j) * v.at(j);
  detail::check_finite(y, "mul_rowvec");
  if (tape && detail::any_tracked(x, v)) {
    Tensor xv = x, vv = v;
    record(tape, y, [xv, vv, m, n](Tape& t, const std::vector<float>& gout) {
      if (xv.tracked()) {
        auto& g = t.grad_buffer(xv.node);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j)
            g[static_cast<size_t>(i) * n + j] += gout[static_cast<size_t>(i) * n + j] * vv.at(j);
      }
      if (vv.tracked()) {
        auto& g = t.grad_buffer(vv.node);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j)
            g[static_cast<size_t>(j)] += gout[static_cast<size_t>(i) * n + j] * xv.at(i, j);
      }
    });
  }
  return y;
}

Tensor scale(Tape* tape, const Tensor& x, float s) {
  Tensor y(x.shape());
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) y.at(static_cast<int>(i)) = x.at(static_cast<int>(i)) * s;
  detail::check_finite(y, "scale");
  if (tape && x.tracked()) {
    const int xn = x.node;
    record(tape, y, [xn, s](Tape& t, const std::vector<float>& gout) {
      auto& g = t.grad_buffer(xn);
      for (size_t i = 0; i < gout.size(); ++i) g[i] += gout[i] * s;
    });
  }
  return y;
}

Tensor scale_rows(Tape* tape, const Tensor& x, const std::vector<float>& s) {
  if (x.ndim() != 2 || static_cast<int>(s.size()) != x.rows())
    throw std::invalid_argument("scale_rows: need one factor per row");
  const int m = x.rows(), n = x.cols();
  Tensor y({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) y.at(i, j) = x.at(i, j) * s[static_cast<size_t>(i)];
  detail::check_finite(y, "scale_rows");
  if (tape && x.tracked()) {
    const int xn = x.node;
    std::vector<float> sc = s;
    record(tape, y, [xn, sc, m, n](Tape& t, const std::vector<float>& gout) {
      auto& g = t.grad_buffer(xn);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          g[static_cast<size_t>(i) * n + j] += gout[static_cast<size_t>(i) * n + j] * sc[static_cast<size_t>(i)];
    });
  }
  return y;
}

Tensor transpose(Tape* tape, const Tensor& x) {
  if (x.ndim() != 2) throw std::invalid_argument("transpose: expects a matrix");
  const int m = x.rows(), n = x.cols();
  Tensor y({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) y.at(j, i) = x.at(i, j);
  if (tape && x.tracked()) {
    const int xn = x.node;
    record(tape, y, [xn, m, n](Tape& t, const std::vector<float>& gout) {
      if (xn < 0) return;
      auto& g = t.grad_buffer(xn);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          g[static_cast<size_t>(i) * n + j] += gout[static_cast<size_t>(j) * m + i];
    });
  }
  return y;
}

Tensor reshape(Tape* tape, const Tensor& x, std::vector<int> shape) {
  Tensor y(std::move(shape), x.vec());
  if (y.numel() != x.numel()) shape_error("reshape", x, y);
  if (tape && x.tracked()) {
    const int xn = x.node;
    record(tape, y, [xn](Tape& t, const std::vector<float>& gout) { accum(t, xn, gout); });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

Tensor softmax(Tape* tape, const Tensor& x) {
  const int n = x.ndim() == 2 ? x.cols() : static_cast<int>(x.numel());
  const int m = static_cast<int>(x.numel()) / n;
  Tensor y(x.shape());
  for (int i = 0; i < m; ++i) {
    const float* row = x.data() + static_cast<size_t>(i) * n;
    float* out = y.data() + static_cast<size_t>(i) * n;
    float mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    float sum = 0.0f;
    for (int j = 0; j < n; ++j) {
      out[j] = std::exp(row[j] - mx);
      sum += out[j];
    }
    const float inv = 1.0f / sum;
    for (int j = 0; j < n; ++j) out[j] *= inv;
  }
  detail::check_finite(y, "softmax");
  if (tape && x.tracked()) {
    const int xn = x.node;
    Tensor yv = y;
    record(tape, y, [xn, yv, m, n](Tape& t, const std::vector<float>& gout) {
      auto& g = t.grad_buffer(xn);
      for (int i = 0; i < m; ++i) {
        const float* p = yv.data() + static_cast<size_t>(i) * n;
        const float* go = gout.data() + static_cast<size_t>(i) * n;
        float dot = 0.0f;
        for (int j = 0; j < n; ++j) dot += go[j] * p[j];
        for (int j = 0; j < n; ++j) g[static_cast<size_t>(i) * n + j] += p[j] * (go[j] - dot);
      }
    });
  }
  return y;
}

Tensor gelu(Tape* tape, const Tensor& x) {
  static constexpr float kInvSqrt2 = 0.70710678118654752440f;
  static constexpr float kInvSqrt2Pi = 0.39894228040143267794f;
  Tensor y(x.shape());
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    const float v = x.at(static_cast<int>(i));
    y.at(static_cast<int>(i)) = 0.5f * v * (1.0f + std::erf(v * kInvSqrt2));
  }
  detail::check_finite(y, "gelu");
  if (tape && x.tracked()) {
    Tensor xv = x;
    record(tape, y, [xv](Tape& t, const std::vector<float>& gout) {
      auto& g = t.grad_buffer(xv.node);
      for (size_t i = 0; i < gout.size(); ++i) {
        const float v = xv.data()[i];
        const float cdf = 0.5f * (1.0f + std::erf(v * kInvSqrt2));
        const float pdf = kInvSqrt2Pi * std::exp(-0.5f * v * v);
        g[i] += gout[i] * (cdf + v * pdf);
      }
    });
  }
  return y;
}

Tensor layer_norm(Tape* tape, const Tensor& x, float eps) {
  const int n = x.ndim() == 2 ? x.cols() : static_cast<int>(x.numel());
  const int m = static_cast<int>(x.numel()) / n;
  Tensor y(x.shape());
  std::vector<float> inv_std(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    const float* row = x.data() + static_cast<size_t>(i) * n;
    float* out = y.data() + static_cast<size_t>(i) * n;
    float mean = 0.0f;
    for (int j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<float>(n);
    float var = 0.0f;
    for (int j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<float>(n);
    const float istd = 1.0f / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(i)] = istd;
    for (int j = 0; j < n; ++j) out[j] = (row[j] - mean) * istd;
  }
  detail::check_finite(y, "layer_norm");
  if (tape && x.tracked()) {
    const int xn = x.node;
    Tensor yv = y;
    record(tape, y, [xn, yv, inv_std, m, n](Tape& t, const std::vector<float>& gout) {
      auto& g = t.grad_buffer(xn);
      for (int i = 0; i < m; ++i) {
        const float* yr = yv.data() + static_cast<size_t>(i) * n;
        const float* go = gout.data() + static_cast<size_t>(i) * n;
        float gmean = 0.0f, gydot = 0.0f;
        for (int j = 0; j < n; ++j) {
          gmean += go[j];
          gydot += go[j] * yr[j];
        }
        gmean /= static_cast<float>(n);
        gydot /= static_cast<float>(n);
        const float istd = inv_std[static_cast<size_t>(i)];
        for (int j = 0; j < n; ++j)
          g[static_cast<size_t>(i) * n + j] += istd * (go[j] - gmean - yr[j] * gydot);
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Lookup / loss
// ---------------------------------------------------------------------------

Tensor embedding_lookup(Tape* tape, const Tensor& table, const std::vector<int>& ids) {
  if (table.ndim() != 2) throw std::invalid_argument("embedding_lookup: table must be 2-D");
  const int d = table.cols();
  const int m = static_cast<int>(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= table.rows())
      throw std::out_of_range("embedding_lookup: id " + std::to_string(id) + " outside vocab of " +
                              std::to_string(table.rows()));
  }
  Tensor y({m, d});
  for (int i = 0; i < m; ++i)
    std::copy_n(table.data() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * d, d,
                y.data() + static_cast<size_t>(i) * d);
  if (tape && table.tracked()) {
    const int tn = table.node;
    std::vector<int> ids_copy = ids;
    record(tape, y, [tn, ids_copy, d](Tape& t, const std::vector<float>& gout) {
      auto& g = t.grad_buffer(tn);
      for (size_t i = 0; i < ids_copy.size(); ++i)
        for (int j = 0; j < d; ++j)
          g[static_cast<size_t>(ids_copy[i]) * d + j] += gout[i * d + j];
    });
  }
  return y;
}

Tensor cross_entropy(Tape* tape, const Tensor& logits, const std::vector<int>& targets,
                     int ignore_id) {
  if (logits.ndim() != 2 || static_cast<int>(targets.size()) != logits.rows())
    throw std::invalid_argument("cross_entropy: need one target per logit row");
  const int m = logits.rows(), n = logits.cols();
  int used = 0;
  double total = 0.0;
  std::vector<float> lse(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    const int tgt = targets[static_cast<size_t>(i)];
    const float* row = logits.data() + static_cast<size_t>(i) * n;
    float mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    float sum = 0.0f;
    for (int j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
    lse[static_cast<size_t>(i)] = mx + std::log(sum);
    if (tgt == ignore_id) continue;
    if (tgt < 0 || tgt >= n)
      throw std::out_of_range("cross_entropy: target id " + std::to_string(tgt) +
                              " outside vocab of " + std::to_string(n));
    total += lse[static_cast<size_t>(i)] - row[tgt];
    ++used;
  }
  if (used == 0) throw std::invalid_argument("cross_entropy: every row is ignored");
  Tensor y = Tensor::scalar(static_cast<float>(total / used));
  if (tape && logits.tracked()) {
    Tensor lv = logits;
    std::vector<int> tgt = targets;
    record(tape, y, [lv, tgt, lse, used, ignore_id, m, n](Tape& t, const std::vector<float>& gout) {
      auto& g = t.grad_buffer(lv.node);
      const float go = gout[0] / static_cast<float>(used);
      for (int i = 0; i < m; ++i) {
        if (tgt[static_cast<size_t>(i)] == ignore_id) continue;
        const float* row = lv.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
          float p = std::exp(row[j] - lse[static_cast<size_t>(i)]);
          g[static_cast<size_t>(i) * n + j] +=
              go * (p - (j == tgt[static_cast<size_t>(i)] ? 1.0f : 0.0f));
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Structure ops
// ---------------------------------------------------------------------------

Tensor slice_cols(Tape* tape, const Tensor& x, int first, int width) {
  if (x.ndim() != 2 || first < 0 || first + width > x.cols())
    throw std::invalid_argument("slice_cols: range outside matrix");
  const int m = x.rows(), n = x.cols();
  Tensor y({m, width});
  for (int i = 0; i < m; ++i)
    std::copy_n(x.data() + static_cast<size_t>(i) * n + first, width,
                y.data() + static_cast<size_t>(i) * width);
  if (tape && x.tracked()) {
    const int xn = x.node;
    record(tape, y, [xn, first, width, m, n](Tape& t, const std::vector<float>& gout) {
      auto& g = t.grad_buffer(xn);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < width; ++j)
          g[static_cast<size_t>(i) * n + first + j] += gout[static_cast<size_t>(i) * width + j];
    });
  }
  return y;
}

Tensor concat_cols(Tape* tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
  const int m = parts[0].rows();
  int n = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 2 || p.rows() != m) shape_error("concat_cols", parts[0], p);
    n += p.cols();
  }
  Tensor y({m, n});
  int off = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < m; ++i)
      std::copy_n(p.data() + static_cast<size_t>(i) * p.cols(), p.cols(),
                  y.data() + static_cast<size_t>(i) * n + off);
    off += p.cols();
  }
  bool tracked = false;
  for (const auto& p : parts) tracked = tracked || p.tracked();
  if (tape && tracked) {
    std::vector<int> nodes;
    std::vector<int> widths;
    for (const auto& p : parts) {
      nodes.push_back(p.node);
      widths.push_back(p.cols());
    }
    record(tape, y, [nodes, widths, m, n](Tape& t, const std::vector<float>& gout) {
      int off2 = 0;
      for (size_t k = 0; k < nodes.size(); ++k) {
        if (nodes[k] >= 0) {
          auto& g = t.grad_buffer(nodes[k]);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < widths[k]; ++j)
              g[static_cast<size_t>(i) * widths[k] + j] +=
                  gout[static_cast<size_t>(i) * n + off2 + j];
        }
        off2 += widths[k];
      }
    });
  }
  return y;
}

Tensor causal_mask(Tape* tape, const Tensor& scores, int past) {
  if (scores.ndim() != 2) throw std::invalid_argument("causal_mask: expects a matrix");
  const int m = scores.rows(), n = scores.cols();
  Tensor y = scores.clone();
  y.node = -1;
  for (int i = 0; i < m; ++i)
    for (int j = i + past + 1; j < n; ++j) y.at(i, j) = -1e30f;
  if (tape && scores.tracked()) {
    const int xn = scores.node;
    record(tape, y, [xn, past, m, n](Tape& t, const std::vector<float>& gout) {
      auto& g = t.grad_buffer(xn);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j <= std::min(i + past, n - 1); ++j)
          g[static_cast<size_t>(i) * n + j] += gout[static_cast<size_t>(i) * n + j];
    });
  }
  return y;
}

Tensor straight_through(Tape* tape, const Tensor& x, const std::function<float(float)>& fn,
                        float lo, float hi, bool clipped) {
  Tensor y(x.shape());
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) y.at(static_cast<int>(i)) = fn(x.at(static_cast<int>(i)));
  detail::check_finite(y, "straight_through");
  if (tape && x.tracked()) {
    Tensor xv = x;
    record(tape, y, [xv, lo, hi, clipped](Tape& t, const std::vector<float>& gout) {
      auto& g = t.grad_buffer(xv.node);
      for (size_t i = 0; i < gout.size(); ++i) {
        const float v = xv.data()[i];
        const bool pass = !clipped || (v >= lo && v <= hi);
        if (pass) g[i] += gout[i];
      }
    });
  }
  return y;
}

}  // namespace bitseq
