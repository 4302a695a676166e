#include "bitseq/quant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bitseq {

float round_clamp(float z, QuantRange range) {
  // std::round is round-half-away-from-zero, the contracted tie-break.
  float r = std::round(z);
  r = std::max(r, static_cast<float>(range.lo));
  r = std::min(r, static_cast<float>(range.hi));
  return r;
}

Tensor round_clamp(const Tensor& z, QuantRange range) {
  Tensor out(z.shape());
  const std::int64_t n = z.numel();
  for (std::int64_t i = 0; i < n; ++i)
    out.at(static_cast<int>(i)) = round_clamp(z.at(static_cast<int>(i)), range);
  return out;
}

float absmax_scale(const Tensor& x_norm, QuantRange range, float eps) {
  float mx = 0.0f;
  for (float v : x_norm.vec()) mx = std::max(mx, std::fabs(v));
  return static_cast<float>(range.hi) / (mx + eps);
}

float absmean_scale(const Tensor& w, float eps) {
  if (w.numel() == 0) throw std::invalid_argument("absmean_scale: empty tensor");
  double sum = 0.0;
  for (float v : w.vec()) sum += std::fabs(v);
  const float mean = static_cast<float>(sum / static_cast<double>(w.numel()));
  return 1.0f / (mean + eps);
}

Int8Activations quantize_activations_int8(const Tensor& x_norm, float eps) {
  const float gamma = absmax_scale(x_norm, QuantRange::int8(), eps);
  Tensor scaled(x_norm.shape());
  const std::int64_t n = x_norm.numel();
  for (std::int64_t i = 0; i < n; ++i)
    scaled.at(static_cast<int>(i)) = x_norm.at(static_cast<int>(i)) * gamma;
  return {round_clamp(scaled, QuantRange::int8()), gamma};
}

TernaryWeights quantize_weights_ternary(const Tensor& w, float eps) {
  const float beta = absmean_scale(w, eps);
  Tensor scaled(w.shape());
  const std::int64_t n = w.numel();
  for (std::int64_t i = 0; i < n; ++i)
    scaled.at(static_cast<int>(i)) = w.at(static_cast<int>(i)) * beta;
  return {round_clamp(scaled, QuantRange::ternary()), beta};
}

Tensor int8_vectorwise_matmul(const Tensor& x, const Tensor& w, float alpha) {
  if (x.ndim() != 2 || w.ndim() != 2 || x.cols() != w.rows())
    throw std::invalid_argument("int8_vectorwise_matmul: inner dimensions differ");
  const int m = x.rows(), k = x.cols(), n = w.cols();

  // Outlier dims: input columns whose max magnitude exceeds alpha.
  std::vector<bool> outlier(static_cast<size_t>(k), false);
  for (int kk = 0; kk < k; ++kk) {
    float mx = 0.0f;
    for (int i = 0; i < m; ++i) mx = std::max(mx, std::fabs(x.at(i, kk)));
    outlier[static_cast<size_t>(kk)] = mx > alpha;
  }

  Tensor y({m, n});

  // Full-precision partial product over outlier dims, ascending so the
  // accumulation order matches the plain float matmul.
  for (int i = 0; i < m; ++i) {
    for (int kk = 0; kk < k; ++kk) {
      if (!outlier[static_cast<size_t>(kk)]) continue;
      const float xv = x.at(i, kk);
      for (int j = 0; j < n; ++j) y.at(i, j) += xv * w.at(kk, j);
    }
  }

  // INT8 partial product over the remaining dims: per-row input scales,
  // per-column weight scales, int32 accumulation.
  bool any_int = false;
  for (int kk = 0; kk < k; ++kk) any_int = any_int || !outlier[static_cast<size_t>(kk)];
  if (!any_int) return y;

  std::vector<float> row_scale(static_cast<size_t>(m), 1.0f);
  for (int i = 0; i < m; ++i) {
    float mx = 0.0f;
    for (int kk = 0; kk < k; ++kk)
      if (!outlier[static_cast<size_t>(kk)]) mx = std::max(mx, std::fabs(x.at(i, kk)));
    if (mx > 0.0f) row_scale[static_cast<size_t>(i)] = mx / 127.0f;
  }
  std::vector<float> col_scale(static_cast<size_t>(n), 1.0f);
  for (int j = 0; j < n; ++j) {
    float mx = 0.0f;
    for (int kk = 0; kk < k; ++kk)
      if (!outlier[static_cast<size_t>(kk)]) mx = std::max(mx, std::fabs(w.at(kk, j)));
    if (mx > 0.0f) col_scale[static_cast<size_t>(j)] = mx / 127.0f;
  }

  std::vector<std::int8_t> xq(static_cast<size_t>(m) * k, 0);
  std::vector<std::int8_t> wq(static_cast<size_t>(k) * n, 0);
  for (int i = 0; i < m; ++i)
    for (int kk = 0; kk < k; ++kk)
      if (!outlier[static_cast<size_t>(kk)])
        xq[static_cast<size_t>(i) * k + kk] = static_cast<std::int8_t>(
            round_clamp(x.at(i, kk) / row_scale[static_cast<size_t>(i)], QuantRange::int8()));
  for (int kk = 0; kk < k; ++kk)
    for (int j = 0; j < n; ++j)
      if (!outlier[static_cast<size_t>(kk)])
        wq[static_cast<size_t>(kk) * n + j] = static_cast<std::int8_t>(
            round_clamp(w.at(kk, j) / col_scale[static_cast<size_t>(j)], QuantRange::int8()));

  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      std::int32_t acc = 0;
      for (int kk = 0; kk < k; ++kk)
        acc += static_cast<std::int32_t>(xq[static_cast<size_t>(i) * k + kk]) *
               static_cast<std::int32_t>(wq[static_cast<size_t>(kk) * n + j]);
      y.at(i, j) += row_scale[static_cast<size_t>(i)] * col_scale[static_cast<size_t>(j)] *
                    static_cast<float>(acc);
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// NF4
// ---------------------------------------------------------------------------

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("inverse_normal_cdf: p outside (0,1)");
  // Acklam rational approximation followed by one Halley refinement.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= phigh) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

NF4Codebook nf4_build_codebook() {
  NF4Codebook cb{};
  const int levels = 1 << NF4Codebook::kBits;
  double raw[16];
  for (int i = 1; i <= levels; ++i)
    raw[i - 1] = inverse_normal_cdf(static_cast<double>(i) / (levels + 1));
  // Normalized to unit max so absmax-scaled inputs land on the codebook range
  // and requantizing a dequantized block is a fixed point.
  const double top = raw[levels - 1];
  for (int i = 0; i < levels; ++i) cb.levels[static_cast<size_t>(i)] = static_cast<float>(raw[i] / top);
  return cb;
}

namespace {

int nearest_level(const NF4Codebook& cb, float z) {
  // Walk up while z is strictly above the midpoint; midpoint ties take the
  // lower index, matching a first-wins exhaustive argmin.
  int idx = 0;
  while (idx < 15 && z > 0.5f * (cb.levels[static_cast<size_t>(idx)] +
                                 cb.levels[static_cast<size_t>(idx) + 1]))
    ++idx;
  return idx;
}

}  // namespace

NF4Quantized nf4_quantize(const Tensor& w, int block_size) {
  const std::int64_t n = w.numel();
  if (block_size <= 0 || n % block_size != 0)
    throw std::invalid_argument("nf4_quantize: block size " + std::to_string(block_size) +
                                " does not divide tensor length " + std::to_string(n));
  static const NF4Codebook cb = nf4_build_codebook();
  NF4Quantized out;
  out.block_size = block_size;
  out.codes.resize(static_cast<size_t>(n));
  const std::int64_t blocks = n / block_size;
  out.absmax.resize(static_cast<size_t>(blocks));
  for (std::int64_t blk = 0; blk < blocks; ++blk) {
    float mx = 0.0f;
    for (int i = 0; i < block_size; ++i)
      mx = std::max(mx, std::fabs(w.at(static_cast<int>(blk * block_size + i))));
    out.absmax[static_cast<size_t>(blk)] = mx;
    for (int i = 0; i < block_size; ++i) {
      const float z = mx > 0.0f ? w.at(static_cast<int>(blk * block_size + i)) / mx : 0.0f;
      out.codes[static_cast<size_t>(blk * block_size + i)] =
          static_cast<std::uint8_t>(nearest_level(cb, z));
    }
  }
  return out;
}

Tensor nf4_dequantize(const NF4Quantized& q, const std::vector<int>& shape) {
  static const NF4Codebook cb = nf4_build_codebook();
  Tensor out(shape);
  if (out.numel() != static_cast<std::int64_t>(q.codes.size()))
    throw std::invalid_argument("nf4_dequantize: shape does not match code count");
  for (size_t i = 0; i < q.codes.size(); ++i)
    out.at(static_cast<int>(i)) =
        cb.levels[q.codes[i]] * q.absmax[i / static_cast<size_t>(q.block_size)];
  return out;
}

}  // namespace bitseq
