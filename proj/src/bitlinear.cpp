#include "bitseq/bitlinear.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bitseq {

const char* to_string(QuantMode m) {
  switch (m) {
    case QuantMode::None: return "none";
    case QuantMode::Both: return "both";
    case QuantMode::Activ: return "activ";
    case QuantMode::Weight: return "weight";
  }
  return "?";
}

std::optional<QuantMode> quant_mode_from_string(const std::string& s) {
  if (s == "none") return QuantMode::None;
  if (s == "both") return QuantMode::Both;
  if (s == "activ") return QuantMode::Activ;
  if (s == "weight") return QuantMode::Weight;
  return std::nullopt;
}

namespace {

float quant_int8(float z) { return round_clamp(z, QuantRange::int8()); }
float quant_ternary(float z) { return round_clamp(z, QuantRange::ternary()); }

Tensor leaf_or_value(Tape* tape, const ParamPtr& p) {
  return tape ? tape->leaf(p) : p->value;
}

Tensor with_bias(Tape* tape, const Tensor& acc, const ParamPtr& bias,
                 const std::vector<float>& dequant, BiasPolicy policy) {
  if (!bias) return scale_rows(tape, acc, dequant);
  const Tensor b = leaf_or_value(tape, bias);
  if (policy == BiasPolicy::Literal) {
    return scale_rows(tape, add_rowvec(tape, acc, b), dequant);
  }
  return add_rowvec(tape, scale_rows(tape, acc, dequant), b);
}

/// AbsMax scale of a single row; each input row is an independent sample, so
/// the activation scale is per row.
float row_absmax_scale(const Tensor& x, int row, float eps) {
  float mx = 0.0f;
  for (int j = 0; j < x.cols(); ++j) mx = std::max(mx, std::fabs(x.at(row, j)));
  return 127.0f / (mx + eps);
}

}  // namespace

Tensor PlainLinear::forward(Tape* tape, const Tensor& x) const {
  Tensor acc = matmul_nt(tape, x, leaf_or_value(tape, weight));
  if (!bias) return acc;
  return add_rowvec(tape, acc, leaf_or_value(tape, bias));
}

Tensor BitLinear::forward(Tape* tape, const Tensor& x) const {
  const Tensor w = leaf_or_value(tape, weight);

  if (mode == QuantMode::None) {
    Tensor acc = matmul_nt(tape, x, w);
    if (!bias) return acc;
    return add_rowvec(tape, acc, leaf_or_value(tape, bias));
  }

  const bool quant_w = mode == QuantMode::Both || mode == QuantMode::Weight;
  const bool quant_x = mode == QuantMode::Both || mode == QuantMode::Activ;

  Tensor lhs = x;
  std::vector<float> gamma(static_cast<size_t>(x.rows()), 1.0f);
  if (quant_x) {
    Tensor xn = layer_norm(tape, x, eps);
    if (ln_gain) xn = mul_rowvec(tape, xn, leaf_or_value(tape, ln_gain));
    for (int i = 0; i < xn.rows(); ++i) gamma[static_cast<size_t>(i)] = row_absmax_scale(xn, i, eps);
    lhs = straight_through(tape, scale_rows(tape, xn, gamma), quant_int8, -128.0f, 127.0f,
                           ste_clipped);
  }

  Tensor rhs = w;
  float beta = 1.0f;
  if (quant_w) {
    beta = absmean_scale(w, eps);
    rhs = straight_through(tape, scale(tape, w, beta), quant_ternary, -1.0f, 1.0f, ste_clipped);
  }

  Tensor acc = matmul_nt(tape, lhs, rhs);
  std::vector<float> dequant(static_cast<size_t>(x.rows()));
  for (size_t i = 0; i < dequant.size(); ++i) dequant[i] = 1.0f / (beta * gamma[i]);
  return with_bias(tape, acc, bias, dequant, bias_policy);
}

int replace_linear(LayerTree& tree, QuantMode target, const ReplaceOptions& opts) {
  int replaced = 0;
  if (tree.slot && *tree.slot) {
    if (auto* plain = dynamic_cast<PlainLinear*>(tree.slot->get())) {
      auto bit = std::make_shared<BitLinear>(plain->weight, plain->bias, target);
      bit->eps = opts.eps;
      bit->bias_policy = opts.bias_policy;
      bit->ste_clipped = opts.ste_clipped;
      *tree.slot = std::move(bit);
      ++replaced;
    }
  }
  for (auto& child : tree.children) replaced += replace_linear(child, target, opts);
  return replaced;
}

namespace {

int count_leaves(const LayerTree& t) {
  int n = (t.slot && *t.slot) ? 1 : 0;
  for (const auto& c : t.children) n += count_leaves(c);
  return n;
}

}  // namespace

SiteCensus count_replacement_sites(const LayerTree& tree) {
  SiteCensus census;
  census.total = count_leaves(tree);
  for (const auto& region : tree.children) {
    if (region.name == "encoder") census.encoder = count_leaves(region);
    else if (region.name == "decoder") census.decoder = count_leaves(region);
    else if (region.name == "lm_head") census.head = count_leaves(region);
  }
  return census;
}

}  // namespace bitseq
