#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "bitseq/errors.hpp"
#include "bitseq/model.hpp"
#include "test_helpers.hpp"

using namespace bitseq;

namespace {

ModelConfig tiny_config(int vocab = 24, int max_len = 32) {
  ModelConfig cfg;
  cfg.n_encoder_blocks = 1;
  cfg.n_decoder_blocks = 1;
  cfg.d_model = 16;
  cfg.d_ff = 32;
  cfg.n_heads = 2;
  cfg.vocab_size = vocab;
  cfg.max_seq_len = max_len;
  return cfg;
}

}  // namespace

TEST_CASE("census: T5-small shape reports (36, 60, 1, 97)") {
  ModelConfig cfg = ModelConfig::t5_small(/*vocab=*/8, /*max_len=*/8);
  Seq2SeqModel m = Seq2SeqModel::build(cfg, QuantMode::Weight, 0);
  LayerTree tree = m.layer_tree();
  CHECK(count_replacement_sites(tree) == SiteCensus{36, 60, 1, 97});
}

TEST_CASE("census: 1+1 toy shape reports 6+10+1 = 17") {
  Seq2SeqModel m = Seq2SeqModel::build(tiny_config(), QuantMode::None, 0);
  LayerTree tree = m.layer_tree();
  CHECK(count_replacement_sites(tree) == SiteCensus{6, 10, 1, 17});
}

TEST_CASE("single-token input produces memory of shape [1, d_model]") {
  Seq2SeqModel m = Seq2SeqModel::build(tiny_config(), QuantMode::None, 1);
  Tensor mem = m.encode(nullptr, {5});
  CHECK(mem.shape() == std::vector<int>{1, 16});
}

TEST_CASE("logits are finite on random inputs across seeds") {
  Rng rng(123);
  for (int seed = 0; seed < 100; ++seed) {
    Seq2SeqModel m = Seq2SeqModel::build(tiny_config(), QuantMode::Weight,
                                         static_cast<std::uint64_t>(seed));
    std::vector<int> src{2 + rng.uniform_int(20), 2 + rng.uniform_int(20)};
    Tensor mem = m.encode(nullptr, src);
    Tensor logits = m.decoder_forward(nullptr, {kPadId, 3, 4}, mem);
    for (float v : logits.vec()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("sequence beyond max_seq_len raises a length error") {
  Seq2SeqModel m = Seq2SeqModel::build(tiny_config(/*vocab=*/24, /*max_len=*/4), QuantMode::None, 0);
  std::vector<int> long_src(5, 2);
  CHECK_THROWS_AS(m.encode(nullptr, long_src), std::length_error);
}

TEST_CASE("cached and uncached greedy decoding agree token for token") {
  for (QuantMode mode :
       {QuantMode::None, QuantMode::Weight, QuantMode::Activ, QuantMode::Both}) {
    Seq2SeqModel m = Seq2SeqModel::build(tiny_config(), mode, 7);
    std::vector<int> src{3, 9, 14, 2};
    SamplingConfig sc;
    sc.temperature = 0.0f;
    sc.max_new_tokens = 12;
    const auto cached = m.sample(src, sc);
    const auto uncached = m.greedy_decode_uncached(src, 12);
    CHECK(cached == uncached);
  }
}

TEST_CASE("tied head shares storage with the token embedding") {
  Seq2SeqModel m = Seq2SeqModel::build(tiny_config(), QuantMode::None, 3);
  CHECK(m.config().tie_lm_head);
  CHECK(m.lm_head->weight.get() == m.tok_emb.get());

  // Mutating through one handle is observable through the other.
  Tensor mem = m.encode(nullptr, {4, 5});
  Tensor before = m.decoder_forward(nullptr, {kPadId}, mem);
  for (auto& v : m.lm_head->weight->value.vec()) v += 0.25f;
  Tensor mem2 = m.encode(nullptr, {4, 5});
  Tensor after = m.decoder_forward(nullptr, {kPadId}, mem2);
  bool changed = false;
  for (int i = 0; i < before.numel(); ++i) changed = changed || before.at(i) != after.at(i);
  CHECK(changed);
}

TEST_CASE("attention rows are probability distributions") {
  Seq2SeqModel m = Seq2SeqModel::build(tiny_config(), QuantMode::Weight, 11);
  std::vector<Tensor> probes;
  m.attn_probe = &probes;
  Tensor mem = m.encode(nullptr, {2, 3, 4, 5, 6});
  m.decoder_forward(nullptr, {kPadId, 7, 8}, mem);
  m.attn_probe = nullptr;
  CHECK(!probes.empty());
  for (const auto& p : probes)
    for (int i = 0; i < p.rows(); ++i) {
      double sum = 0.0;
      for (int j = 0; j < p.cols(); ++j) {
        sum += p.at(i, j);
        CHECK(p.at(i, j) >= 0.0f);
      }
      CHECK(std::fabs(sum - 1.0) < 1e-5);
    }
}

TEST_CASE("decoder causality: future target tokens cannot affect earlier logits") {
  Seq2SeqModel m = Seq2SeqModel::build(tiny_config(), QuantMode::None, 5);
  Tensor mem = m.encode(nullptr, {2, 3});
  std::vector<int> a{kPadId, 4, 5, 6, 7};
  std::vector<int> b{kPadId, 4, 5, 20, 21};  // differs only from position 3 on
  Tensor la = m.decoder_forward(nullptr, a, mem);
  Tensor lb = m.decoder_forward(nullptr, b, mem);
  for (int t = 0; t < 3; ++t)
    for (int j = 0; j < la.cols(); ++j) CHECK(la.at(t, j) == lb.at(t, j));
}

TEST_CASE("checkpoint save/load round trip") {
  const std::string path = "test_ckpt.bsq";
  const std::string path2 = "test_ckpt2.bsq";
  ReplaceOptions opts{3e-5f, BiasPolicy::PostDequant, /*ste_clipped=*/false};
  Seq2SeqModel m = Seq2SeqModel::build(tiny_config(), QuantMode::Weight, 21, opts);
  m.save_checkpoint(path);
  Seq2SeqModel loaded = Seq2SeqModel::load_checkpoint(path);
  CHECK(loaded.replace_options().eps == 3e-5f);
  CHECK(loaded.replace_options().bias_policy == BiasPolicy::PostDequant);
  CHECK(loaded.replace_options().ste_clipped == false);
  loaded.save_checkpoint(path2);

  auto slurp = [](const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
  };
  CHECK(slurp(path) == slurp(path2));  // save -> load -> save is byte-identical
  CHECK(loaded.quant_mode() == QuantMode::Weight);

  std::vector<int> src{3, 4, 5};
  Tensor l1 = m.decoder_forward(nullptr, {kPadId, 6}, m.encode(nullptr, src));
  Tensor l2 = loaded.decoder_forward(nullptr, {kPadId, 6}, loaded.encode(nullptr, src));
  CHECK(l1.vec() == l2.vec());

  // Truncation is reported as corruption, naming what broke.
  const std::string full = slurp(path);
  std::ofstream os("test_ckpt_trunc.bsq", std::ios::binary);
  os.write(full.data(), static_cast<std::streamsize>(full.size() / 2));
  os.close();
  CHECK_THROWS_AS(Seq2SeqModel::load_checkpoint("test_ckpt_trunc.bsq"), FormatError);
  CHECK_THROWS_AS(Seq2SeqModel::load_checkpoint("no_such_file.bsq"), IoError);

  std::remove(path.c_str());
  std::remove(path2.c_str());
  std::remove("test_ckpt_trunc.bsq");
}

TEST_CASE("sampling: temperature zero is greedy, tau=1 keeps the distribution") {
  Seq2SeqModel m = Seq2SeqModel::build(tiny_config(), QuantMode::None, 13);
  std::vector<int> src{2, 3};
  SamplingConfig sc;
  sc.temperature = 0.0f;
  sc.max_new_tokens = 8;
  CHECK(m.sample(src, sc) == m.greedy_decode_uncached(src, 8));

  // tau = 1 leaves softmax(logits / tau) equal to softmax(logits).
  Rng rng(1);
  Tensor logits = bitseq::testing::random_tensor(rng, {1, 10}, -2.0f, 2.0f);
  Tensor p1 = softmax(nullptr, logits);
  Tensor p2 = softmax(nullptr, scale(nullptr, logits, 1.0f / 1.0f));
  CHECK(p1.vec() == p2.vec());
}

TEST_CASE("sample frequencies track softmax(logits / 0.7) within 3 sigma") {
  Seq2SeqModel m = Seq2SeqModel::build(tiny_config(/*vocab=*/12), QuantMode::None, 17);
  std::vector<int> src{2, 3, 4};

  // Reference distribution from the deterministic first-step logits.
  Tensor mem = m.encode(nullptr, src);
  DecodeState st = m.init_decode(mem);
  Tensor logits = m.decode_step(st, mem, kPadId);
  Tensor probs = softmax(nullptr, scale(nullptr, logits, 1.0f / 0.7f));

  const int n = 10000;
  std::vector<int> counts(12, 0);
  SamplingConfig sc;
  sc.temperature = 0.7f;
  sc.max_new_tokens = 1;
  for (int i = 0; i < n; ++i) {
    sc.seed = static_cast<std::uint64_t>(i) * 2654435761ull + 1;
    const auto out = m.sample(src, sc);
    REQUIRE(out.size() == 1);
    counts[static_cast<size_t>(out[0])] += 1;
  }
  for (int j = 0; j < 12; ++j) {
    const double p = probs.at(0, j);
    const double sigma = std::sqrt(n * p * (1.0 - p));
    CHECK(std::fabs(counts[static_cast<size_t>(j)] - n * p) <= 3.0 * sigma + 1.0);
  }
}

TEST_CASE("decode state: cache length tracks the step counter") {
  Seq2SeqModel m = Seq2SeqModel::build(tiny_config(), QuantMode::None, 19);
  Tensor mem = m.encode(nullptr, {2, 3});
  DecodeState st = m.init_decode(mem);
  m.decode_step(st, mem, kPadId);
  m.decode_step(st, mem, 5);
  CHECK(st.step == 2);
  for (const auto& c : st.self_cache)
    CHECK(c.k.size() == static_cast<size_t>(2 * m.config().d_model));
}
