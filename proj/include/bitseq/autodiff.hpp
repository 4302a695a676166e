#pragma once

#include <functional>
#include <vector>

#include "bitseq/tensor.hpp"

namespace bitseq {

/// Reverse-mode tape. Ops append nodes in execution order, which is already a
/// topological order, so backward() is one reverse sweep visiting each node
/// exactly once.
///
/// Contract: node gradients are zeroed at the start of every backward() call;
/// parameter gradients are never cleared here, so running backward twice
/// accumulates parameter gradients additively. Single-threaded per instance.
class Tape {
 public:
  /// Registers a parameter as a leaf node. Gradients reaching the leaf are
  /// accumulated into p->grad.
  Tensor leaf(const ParamPtr& p);

  /// Back-propagates from a tracked scalar. Parameter gradients accumulate.
  void backward(const Tensor& loss);

  /// Back-propagates an explicit upstream gradient from any tracked tensor.
  void backward_with_seed(const Tensor& out, const std::vector<float>& seed);

  /// Drops all nodes (captured tensors are released).
  void reset();

  std::size_t size() const { return nodes_.size(); }

  /// d(last loss)/d(t) for a tracked tensor; valid after backward().
  const std::vector<float>& grad_of(const Tensor& t) const;

  // --- used by op implementations ---
  int push(std::int64_t numel, std::function<void(Tape&, const std::vector<float>&)> bwd);
  std::vector<float>& grad_buffer(int node) { return nodes_[static_cast<size_t>(node)].grad; }

 private:
  struct Node {
    std::int64_t numel = 0;
    std::vector<float> grad;  // sized lazily in backward()
    std::function<void(Tape&, const std::vector<float>&)> backward;
  };
  std::vector<Node> nodes_;
};

// Differentiable operations. Every op takes the tape first; pass nullptr for a
// pure forward evaluation (nothing is recorded). Shapes are validated and
// violations throw std::invalid_argument naming both shapes.

/// C[m,n] = sum_k A[m,k] * B[k,n]
Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);
/// C[m,n] = sum_k A[m,k] * B[n,k]  (B used transposed; linear-layer layout)
Tensor matmul_nt(Tape* tape, const Tensor& a, const Tensor& b);

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
/// y[i,j] = x[i,j] + v[j]
Tensor add_rowvec(Tape* tape, const Tensor& x, const Tensor& v);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
/// y[i,j] = x[i,j] * v[j]
Tensor mul_rowvec(Tape* tape, const Tensor& x, const Tensor& v);
Tensor scale(Tape* tape, const Tensor& x, float s);
/// y[i,j] = x[i,j] * s[i]; the per-row factors are constants for backward.
Tensor scale_rows(Tape* tape, const Tensor& x, const std::vector<float>& s);
Tensor transpose(Tape* tape, const Tensor& x);
Tensor reshape(Tape* tape, const Tensor& x, std::vector<int> shape);

/// Softmax over the last axis.
Tensor softmax(Tape* tape, const Tensor& x);
/// Exact GELU: 0.5 x (1 + erf(x / sqrt(2))).
Tensor gelu(Tape* tape, const Tensor& x);
/// Zero mean / unit variance over the last axis, eps inside the sqrt.
Tensor layer_norm(Tape* tape, const Tensor& x, float eps);

/// y[i,:] = table[ids[i],:]
Tensor embedding_lookup(Tape* tape, const Tensor& table, const std::vector<int>& ids);

/// Mean token-level cross entropy of row-wise logits against target ids.
/// Rows whose target equals ignore_id contribute nothing.
Tensor cross_entropy(Tape* tape, const Tensor& logits, const std::vector<int>& targets,
                     int ignore_id = -1);

Tensor slice_cols(Tape* tape, const Tensor& x, int first, int width);
Tensor concat_cols(Tape* tape, const std::vector<Tensor>& parts);

/// scores[i,j] with j > i + past are forced to -1e30 (grad blocked there).
Tensor causal_mask(Tape* tape, const Tensor& scores, int past = 0);

/// Forward applies fn elementwise; backward passes the upstream gradient
/// through exactly where lo <= x <= hi and zero elsewhere (clipped STE).
/// With clip disabled the gradient passes through everywhere.
Tensor straight_through(Tape* tape, const Tensor& x, const std::function<float(float)>& fn,
                        float lo, float hi, bool clipped = true);

namespace detail {
// Raw kernels shared by forwards and backwards. C is accumulated (+=).
void mm_nn_acc(float* c, const float* a, const float* b, int m, int k, int n);
void mm_nt_acc(float* c, const float* a, const float* b, int m, int k, int n);
void mm_tn_acc(float* c, const float* a, const float* b, int m, int k, int n);
void check_finite(const Tensor& t, const char* op);
}  // namespace detail

}  // namespace bitseq
