#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bitseq/autodiff.hpp"
#include "bitseq/quant.hpp"
#include "bitseq/tensor.hpp"

namespace bitseq {

enum class QuantMode { None, Both, Activ, Weight };

const char* to_string(QuantMode m);
std::optional<QuantMode> quant_mode_from_string(const std::string& s);

/// Eq-literal bias handling divides b by the dequantization scale(s);
/// PostDequant adds b after rescaling instead.
enum class BiasPolicy { Literal, PostDequant };

/// Common surface of every linear-layer flavor. Parameters are held through
/// shared_ptr so replacement transfers handles (weight tying survives) and
/// tied matrices stay tied.
class LinearBase {
 public:
  virtual ~LinearBase() = default;
  virtual Tensor forward(Tape* tape, const Tensor& x) const = 0;
  virtual const char* kind() const = 0;

  virtual int out_features() const { return weight->value.rows(); }
  virtual int in_features() const { return weight->value.cols(); }

  ParamPtr weight;          // [out x in]
  ParamPtr bias;            // [out], may be null
};

/// y = x W^T + b
class PlainLinear final : public LinearBase {
 public:
  PlainLinear(ParamPtr w, ParamPtr b = nullptr) {
    weight = std::move(w);
    bias = std::move(b);
  }
  Tensor forward(Tape* tape, const Tensor& x) const override;
  const char* kind() const override { return "linear"; }
};

/// Selectively quantized linear layer. Scaling factors are recomputed from
/// the live values on every forward (QAT semantics); both quantizers sit
/// inside straight-through nodes during training.
class BitLinear final : public LinearBase {
 public:
  BitLinear(ParamPtr w, ParamPtr b, QuantMode m) : mode(m) {
    weight = std::move(w);
    bias = std::move(b);
  }

  Tensor forward(Tape* tape, const Tensor& x) const override;
  const char* kind() const override { return "bitlinear"; }

  QuantMode mode = QuantMode::None;
  float eps = kQuantEps;
  BiasPolicy bias_policy = BiasPolicy::Literal;
  bool ste_clipped = true;   // false: gradient passes through everywhere
  ParamPtr ln_gain;          // optional gain on the internal LayerNorm
};

/// Named module hierarchy over non-owning layer slots. Writing a new layer
/// into a slot is visible to whichever block owns the shared_ptr.
struct LayerTree {
  std::string name;
  std::shared_ptr<LinearBase>* slot = nullptr;  // set on linear-family leaves
  bool other_leaf = false;                      // non-linear leaf (norm, embedding)
  std::vector<LayerTree> children;

  LayerTree() = default;
  explicit LayerTree(std::string n) : name(std::move(n)) {}
  LayerTree(std::string n, std::shared_ptr<LinearBase>* s) : name(std::move(n)), slot(s) {}

  LayerTree& child(std::string n) {
    children.emplace_back(std::move(n));
    return children.back();
  }
};

struct ReplaceOptions {
  float eps = kQuantEps;
  BiasPolicy bias_policy = BiasPolicy::Literal;
  bool ste_clipped = true;
};

/// Recursive surgery: every plain linear leaf becomes a BitLinear with the
/// given mode, parameter handles transferred. Already-replaced leaves are
/// left alone, so the operation is idempotent. Returns the replacement count.
int replace_linear(LayerTree& tree, QuantMode target, const ReplaceOptions& opts = {});

struct SiteCensus {
  int encoder = 0;
  int decoder = 0;
  int head = 0;
  int total = 0;

  bool operator==(const SiteCensus&) const = default;
};

/// Counts linear-family leaves per region. Regions come from the depth-1
/// subtree names "encoder", "decoder" and "lm_head"; leaves elsewhere count
/// toward the total only.
SiteCensus count_replacement_sites(const LayerTree& tree);

}  // namespace bitseq
