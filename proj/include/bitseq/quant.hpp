#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bitseq/tensor.hpp"

namespace bitseq {

/// Contiguous integer code range [lo, hi] with lo <= 0 <= hi.
struct QuantRange {
  int lo;
  int hi;

  static constexpr QuantRange int8() { return {-128, 127}; }
  static constexpr QuantRange ternary() { return {-1, 1}; }
};

constexpr float kQuantEps = 1e-5f;  // default epsilon for all scale functions

/// Round half away from zero, then clamp into the range. The tie-break is a
/// documented contract: 1.5 -> 2, -1.5 -> -2 (before clamping).
float round_clamp(float z, QuantRange range);
Tensor round_clamp(const Tensor& z, QuantRange range);

/// Activation scale: range.hi / (max|x| + eps). AbsMax pins the largest
/// magnitude element to the edge of the range.
float absmax_scale(const Tensor& x_norm, QuantRange range, float eps = kQuantEps);

/// Weight scale: 1 / (mean|W| + eps).
float absmean_scale(const Tensor& w, float eps = kQuantEps);

struct Int8Activations {
  Tensor codes;  // values in [-128, 127], stored as floats
  float gamma;
};
Int8Activations quantize_activations_int8(const Tensor& x_norm, float eps = kQuantEps);

struct TernaryWeights {
  Tensor codes;  // values in {-1, 0, 1}, stored as floats
  float beta;
};
TernaryWeights quantize_weights_ternary(const Tensor& w, float eps = kQuantEps);

/// Row/column-scaled INT8 product with per-column outlier decomposition:
/// input columns whose max |x| exceeds alpha run in full precision, the rest
/// through the scaled INT8 path, and the two partial products are summed.
/// alpha == 0 sends every column down the full-precision path.
Tensor int8_vectorwise_matmul(const Tensor& x, const Tensor& w, float alpha = 6.0f);

/// 16 strictly increasing levels at normal quantiles i/(2^k+1), i = 1..16.
struct NF4Codebook {
  static constexpr int kBits = 4;
  std::array<float, 16> levels;
};

NF4Codebook nf4_build_codebook();

struct NF4Quantized {
  std::vector<std::uint8_t> codes;  // one codebook index per element
  std::vector<float> absmax;        // one per block
  int block_size;
};

/// Per-block absmax scaling then nearest-level assignment. block_size must
/// divide the tensor length; anything else throws (no padding).
NF4Quantized nf4_quantize(const Tensor& w, int block_size = 64);
Tensor nf4_dequantize(const NF4Quantized& q, const std::vector<int>& shape);

/// Inverse standard normal CDF (used to build the NF4 codebook; exposed for
/// tests). Accurate to ~1e-9 over (0, 1).
double inverse_normal_cdf(double p);

}  // namespace bitseq
