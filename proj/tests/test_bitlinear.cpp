#include <doctest.h>

#include <cmath>

#include "bitseq/bitlinear.hpp"
#include "test_helpers.hpp"

using namespace bitseq;
using bitseq::testing::random_tensor;

namespace {

// Scalar brute-force evaluation of the three quantized-linear formulas, one
// input row at a time, independent of the tensor/tape path.
double oracle_round_clamp(double z, double lo, double hi) {
  double r = z >= 0.0 ? std::floor(z + 0.5) : std::ceil(z - 0.5);
  return std::min(hi, std::max(lo, r));
}

std::vector<double> oracle_forward(const Tensor& w, const std::vector<float>* b, QuantMode mode,
                                   const std::vector<float>& x_row, float eps,
                                   BiasPolicy policy) {
  const int out = w.rows(), in = w.cols();
  const bool qx = mode == QuantMode::Both || mode == QuantMode::Activ;
  const bool qw = mode == QuantMode::Both || mode == QuantMode::Weight;

  std::vector<double> lhs(x_row.begin(), x_row.end());
  double gamma = 1.0;
  if (qx) {
    double mean = 0.0;
    for (double v : lhs) mean += v;
    mean /= in;
    double var = 0.0;
    for (double v : lhs) var += (v - mean) * (v - mean);
    var /= in;
    for (auto& v : lhs) v = (v - mean) / std::sqrt(var + eps);
    double mx = 0.0;
    for (double v : lhs) mx = std::max(mx, std::fabs(v));
    gamma = 127.0 / (mx + eps);
    for (auto& v : lhs) v = oracle_round_clamp(gamma * v, -128, 127);
  }

  std::vector<double> rhs(w.vec().begin(), w.vec().end());
  double beta = 1.0;
  if (qw) {
    double mean = 0.0;
    for (double v : rhs) mean += std::fabs(v);
    mean /= w.numel();
    beta = 1.0 / (mean + eps);
    for (auto& v : rhs) v = oracle_round_clamp(beta * v, -1, 1);
  }

  std::vector<double> y(static_cast<size_t>(out), 0.0);
  for (int o = 0; o < out; ++o) {
    double acc = 0.0;
    for (int j = 0; j < in; ++j) acc += lhs[static_cast<size_t>(j)] * rhs[static_cast<size_t>(o) * in + j];
    const double bias = b ? (*b)[static_cast<size_t>(o)] : 0.0;
    y[static_cast<size_t>(o)] = policy == BiasPolicy::Literal
                                    ? (acc + bias) / (beta * gamma)
                                    : acc / (beta * gamma) + bias;
  }
  return y;
}

std::shared_ptr<BitLinear> make_layer(Rng& rng, int out, int in, QuantMode mode, bool with_bias,
                                      BiasPolicy policy = BiasPolicy::Literal,
                                      float eps = kQuantEps) {
  auto w = make_param("w", random_tensor(rng, {out, in}, -1.0f, 1.0f));
  ParamPtr b;
  if (with_bias) b = make_param("b", random_tensor(rng, {out}, -0.5f, 0.5f));
  auto layer = std::make_shared<BitLinear>(std::move(w), std::move(b), mode);
  layer->bias_policy = policy;
  layer->eps = eps;
  return layer;
}

void check_against_oracle(const BitLinear& layer, const Tensor& x, double tol = 1e-5) {
  Tensor y = layer.forward(nullptr, x);
  for (int i = 0; i < x.rows(); ++i) {
    std::vector<float> row(x.data() + static_cast<size_t>(i) * x.cols(),
                           x.data() + static_cast<size_t>(i + 1) * x.cols());
    auto expect = oracle_forward(layer.weight->value, layer.bias ? &layer.bias->value.vec() : nullptr,
                                 layer.mode, row, layer.eps, layer.bias_policy);
    for (int o = 0; o < y.cols(); ++o) {
      const double scale = std::max(1.0, std::fabs(expect[static_cast<size_t>(o)]));
      CHECK(std::fabs(y.at(i, o) - expect[static_cast<size_t>(o)]) < tol * scale);
    }
  }
}

}  // namespace

TEST_CASE("all three quantized forwards match the formula oracle") {
  Rng rng(404);
  for (QuantMode mode : {QuantMode::Both, QuantMode::Activ, QuantMode::Weight}) {
    for (BiasPolicy policy : {BiasPolicy::Literal, BiasPolicy::PostDequant}) {
      for (int trial = 0; trial < 25; ++trial) {
        const int out = 1 + rng.uniform_int(8);
        const int in = 2 + rng.uniform_int(7);
        auto layer = make_layer(rng, out, in, mode, trial % 2 == 0, policy);
        Tensor x = random_tensor(rng, {2 + rng.uniform_int(3), in}, -2.0f, 2.0f);
        check_against_oracle(*layer, x);
      }
    }
  }
}

TEST_CASE("zeros propagate through Both and Activ") {
  Rng rng(1);
  for (QuantMode mode : {QuantMode::Both, QuantMode::Activ}) {
    auto layer = make_layer(rng, 3, 4, mode, /*with_bias=*/false);
    Tensor y = layer->forward(nullptr, Tensor::zeros({2, 4}));
    for (float v : y.vec()) CHECK(v == 0.0f);
  }
}

TEST_CASE("Weight mode: sign-matrix identity equals full precision") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const float c = rng.uniform(0.05f, 3.0f);
    auto w = make_param("w", Tensor({4, 5}));
    for (auto& v : w->value.vec()) v = (rng.uniform() < 0.5f ? -1.0f : 1.0f) * c;
    auto layer = std::make_shared<BitLinear>(w, nullptr, QuantMode::Weight);
    layer->eps = 1e-9f;  // the identity is exact in the eps -> 0 limit
    Tensor x = random_tensor(rng, {3, 5}, -2.0f, 2.0f);
    Tensor y = layer->forward(nullptr, x);
    PlainLinear full(w, nullptr);
    Tensor ref = full.forward(nullptr, x);
    for (int i = 0; i < y.numel(); ++i)
      CHECK(std::fabs(y.at(i) - ref.at(i)) <= 1e-6 * std::max(1.0f, std::fabs(ref.at(i))));
  }
}

TEST_CASE("Weight mode: x = 0 exposes the two bias policies") {
  Rng rng(3);
  auto w = make_param("w", random_tensor(rng, {3, 4}, -1.0f, 1.0f));
  auto b = make_param("b", Tensor({3}, {0.3f, -0.6f, 0.9f}));
  const float beta = absmean_scale(w->value, kQuantEps);

  auto literal = std::make_shared<BitLinear>(w, b, QuantMode::Weight);
  Tensor y1 = literal->forward(nullptr, Tensor::zeros({1, 4}));
  for (int o = 0; o < 3; ++o) CHECK(y1.at(0, o) == doctest::Approx(b->value.at(o) / beta));

  auto post = std::make_shared<BitLinear>(w, b, QuantMode::Weight);
  post->bias_policy = BiasPolicy::PostDequant;
  Tensor y2 = post->forward(nullptr, Tensor::zeros({1, 4}));
  for (int o = 0; o < 3; ++o) CHECK(y2.at(0, o) == doctest::Approx(b->value.at(o)));
}

TEST_CASE("Activ mode: LN makes the forward scale-invariant in x") {
  Rng rng(4);
  auto layer = make_layer(rng, 4, 6, QuantMode::Activ, true);
  Tensor x = random_tensor(rng, {2, 6}, -1.0f, 1.0f);
  Tensor xs = x.clone();
  for (auto& v : xs.vec()) v *= 37.5f;
  Tensor y1 = layer->forward(nullptr, x);
  Tensor y2 = layer->forward(nullptr, xs);
  for (int i = 0; i < y1.numel(); ++i)
    CHECK(y1.at(i) == doctest::Approx(y2.at(i)).epsilon(1e-4));
}

TEST_CASE("mode None forward is bit-identical to the plain linear it replaced") {
  Rng rng(5);
  auto w = make_param("w", random_tensor(rng, {5, 3}));
  auto b = make_param("b", random_tensor(rng, {5}));
  PlainLinear plain(w, b);
  BitLinear none(w, b, QuantMode::None);
  Tensor x = random_tensor(rng, {4, 3}, -3.0f, 3.0f);
  CHECK(plain.forward(nullptr, x).vec() == none.forward(nullptr, x).vec());
}

TEST_CASE("Weight mode: rescaling W keeps codes and is output-equivariant") {
  // Codes are invariant under W -> cW; the output scales by c exactly as the
  // full-precision layer does (1/beta carries mean|W|).
  Rng rng(6);
  auto w = make_param("w", random_tensor(rng, {4, 4}, -1.0f, 1.0f));
  auto layer = std::make_shared<BitLinear>(w, nullptr, QuantMode::Weight);
  layer->eps = 1e-9f;
  Tensor x = random_tensor(rng, {2, 4}, -1.0f, 1.0f);
  const float c = 13.25f;

  auto [codes1, beta1] = quantize_weights_ternary(w->value, layer->eps);
  Tensor y1 = layer->forward(nullptr, x);
  for (auto& v : w->value.vec()) v *= c;
  auto [codes2, beta2] = quantize_weights_ternary(w->value, layer->eps);
  Tensor y2 = layer->forward(nullptr, x);

  CHECK(codes1.vec() == codes2.vec());
  for (int i = 0; i < y1.numel(); ++i)
    CHECK(c * y1.at(i) == doctest::Approx(y2.at(i)).epsilon(1e-5));
}

TEST_CASE("gradient reaches W and b in every mode") {
  Rng rng(7);
  for (QuantMode mode :
       {QuantMode::None, QuantMode::Both, QuantMode::Activ, QuantMode::Weight}) {
    auto layer = make_layer(rng, 4, 4, mode, /*with_bias=*/true);
    Tensor x = random_tensor(rng, {3, 4}, -1.0f, 1.0f);
    Tape tape;
    Tensor y = layer->forward(&tape, x);
    std::vector<float> seed(static_cast<size_t>(y.numel()), 1.0f);
    tape.backward_with_seed(y, seed);
    auto any_nonzero = [](const Tensor& g) {
      for (float v : g.vec())
        if (v != 0.0f) return true;
      return false;
    };
    CHECK(any_nonzero(layer->weight->grad));
    CHECK(any_nonzero(layer->bias->grad));
  }
}

// ---------------------------------------------------------------------------
// Replacement surgery
// ---------------------------------------------------------------------------

namespace {

struct ToyModule {
  std::shared_ptr<LinearBase> a, b, c;
  std::shared_ptr<LinearBase> not_linear;  // stays empty slot-less

  LayerTree tree() {
    LayerTree root("toy");
    LayerTree& enc = root.child("encoder");
    enc.children.emplace_back("a", &a);
    LayerTree& inner = enc.child("inner");
    inner.children.emplace_back("b", &b);
    LayerTree& dec = root.child("decoder");
    dec.children.emplace_back("c", &c);
    LayerTree& norm = dec.child("norm");
    norm.other_leaf = true;
    return root;
  }
};

ToyModule make_toy(Rng& rng) {
  ToyModule m;
  m.a = std::make_shared<PlainLinear>(make_param("a.w", random_tensor(rng, {2, 2})));
  m.b = std::make_shared<PlainLinear>(make_param("b.w", random_tensor(rng, {3, 2})),
                                      make_param("b.b", random_tensor(rng, {3})));
  m.c = std::make_shared<PlainLinear>(make_param("c.w", random_tensor(rng, {2, 3})));
  return m;
}

}  // namespace

TEST_CASE("replace_linear rewrites nested plain linears, transfers parameters") {
  Rng rng(8);
  ToyModule m = make_toy(rng);
  const auto w_before = m.b->weight->value.vec();
  const auto* w_ptr = m.b->weight.get();

  LayerTree tree = m.tree();
  const int replaced = replace_linear(tree, QuantMode::Weight);
  CHECK(replaced == 3);
  CHECK(std::string(m.a->kind()) == "bitlinear");
  CHECK(std::string(m.b->kind()) == "bitlinear");
  CHECK(std::string(m.c->kind()) == "bitlinear");
  CHECK(m.b->weight->value.vec() == w_before);  // bit-identical parameters
  CHECK(m.b->weight.get() == w_ptr);            // same storage, tying survives

  // Idempotent: a second pass changes nothing.
  CHECK(replace_linear(tree, QuantMode::Weight) == 0);
}

TEST_CASE("replace_linear leaves a linear-free tree unchanged") {
  LayerTree root("empty");
  root.child("norm").other_leaf = true;
  CHECK(replace_linear(root, QuantMode::Both) == 0);
}

TEST_CASE("count_replacement_sites classifies regions") {
  SUBCASE("empty model") {
    LayerTree root("m");
    CHECK(count_replacement_sites(root) == SiteCensus{0, 0, 0, 0});
  }
  SUBCASE("encoder-only single block: 4 attention + 2 ffn") {
    Rng rng(9);
    std::vector<std::shared_ptr<LinearBase>> slots;
    for (int i = 0; i < 6; ++i)
      slots.push_back(
          std::make_shared<PlainLinear>(make_param("w", random_tensor(rng, {2, 2}))));
    LayerTree root("m");
    LayerTree& enc = root.child("encoder");
    LayerTree& blk = enc.child("block0");
    LayerTree& attn = blk.child("self_attn");
    attn.children.emplace_back("q", &slots[0]);
    attn.children.emplace_back("k", &slots[1]);
    attn.children.emplace_back("v", &slots[2]);
    attn.children.emplace_back("o", &slots[3]);
    LayerTree& ffn = blk.child("ffn");
    ffn.children.emplace_back("wi", &slots[4]);
    ffn.children.emplace_back("wo", &slots[5]);
    CHECK(count_replacement_sites(root) == SiteCensus{6, 0, 0, 6});
  }
}
