#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bitseq/bitlinear.hpp"
#include "bitseq/rng.hpp"
#include "bitseq/tensor.hpp"

namespace bitseq {

constexpr int kPadId = 0;  // also the decoder start token
constexpr int kEosId = 1;

struct ModelConfig {
  int n_encoder_blocks = 6;
  int n_decoder_blocks = 6;
  int d_model = 512;
  int d_ff = 2048;
  int n_heads = 8;
  int vocab_size = 512;
  int max_seq_len = 256;
  bool tie_lm_head = true;

  static ModelConfig t5_small(int vocab, int max_len) {
    return {6, 6, 512, 2048, 8, vocab, max_len, true};
  }

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct SamplingConfig {
  float temperature = 0.7f;  // 0 means greedy argmax
  int max_new_tokens = 64;
  std::uint64_t seed = 0;
};

struct AttentionLayers {
  std::shared_ptr<LinearBase> q, k, v, o;
};

struct FfnLayers {
  std::shared_ptr<LinearBase> wi, wo;
};

struct EncoderBlock {
  ParamPtr ln_attn;  // pre-norm gains
  AttentionLayers self_attn;
  ParamPtr ln_ffn;
  FfnLayers ffn;
};

struct DecoderBlock {
  ParamPtr ln_self;
  AttentionLayers self_attn;
  ParamPtr ln_cross;
  AttentionLayers cross_attn;
  ParamPtr ln_ffn;
  FfnLayers ffn;
};

/// Incremental decoding state: per-block self-attention caches plus the
/// cross-attention keys/values projected once from the encoder memory.
struct DecodeState {
  struct Cache {
    std::vector<float> k, v;  // step * d_model floats, row-major
  };
  std::vector<Cache> self_cache;
  std::vector<Tensor> cross_k, cross_v;  // per block, [mem_len x d_model]
  std::vector<int> generated;
  int step = 0;
};

/// Encoder-decoder transformer with pre-norm blocks, learned absolute
/// position embeddings and an optionally tied vocabulary head. Every linear
/// site sits behind a shared_ptr slot so quantization surgery composes.
class Seq2SeqModel {
 public:
  Seq2SeqModel() = default;
  Seq2SeqModel(const Seq2SeqModel&) = delete;
  Seq2SeqModel& operator=(const Seq2SeqModel&) = delete;
  Seq2SeqModel(Seq2SeqModel&&) = default;
  Seq2SeqModel& operator=(Seq2SeqModel&&) = default;

  /// Fresh model: plain linears built and then run through replace_linear
  /// with the requested mode.
  static Seq2SeqModel build(const ModelConfig& cfg, QuantMode mode, std::uint64_t seed,
                            const ReplaceOptions& opts = {});

  const ModelConfig& config() const { return cfg_; }
  QuantMode quant_mode() const { return mode_; }
  const ReplaceOptions& replace_options() const { return replace_opts_; }

  /// Module hierarchy view for surgery and census; rebuild after any move.
  LayerTree layer_tree();

  /// Deterministic (name, parameter) list; tied tensors appear once.
  std::vector<std::pair<std::string, ParamPtr>> named_parameters() const;
  std::vector<ParamPtr> parameters() const;

  /// Encoder forward. Pass a tape to record gradients.
  Tensor encode(Tape* tape, const std::vector<int>& src_ids) const;

  /// Teacher-forced decoder forward over the whole target prefix; returns
  /// [len x vocab] logits.
  Tensor decoder_forward(Tape* tape, const std::vector<int>& tgt_in,
                         const Tensor& memory) const;

  /// Cross-entropy of tgt_out under teacher forcing; decoder input is
  /// tgt_out shifted right with the start token. Rows with pad targets are
  /// ignored.
  Tensor seq2seq_loss(Tape* tape, const std::vector<int>& src_ids,
                      const std::vector<int>& tgt_out) const;

  DecodeState init_decode(const Tensor& memory) const;

  /// Appends one token of context and returns the next-token logits
  /// ([1 x vocab]). Inference only.
  Tensor decode_step(DecodeState& state, const Tensor& memory, int token) const;

  /// Autoregressive generation: temperature 0 is greedy argmax, otherwise
  /// multinomial over softmax(logits / tau) with the seeded RNG. Stops at EOS
  /// or the token budget. Uses the KV cache.
  std::vector<int> sample(const std::vector<int>& src_ids, const SamplingConfig& sc) const;

  /// Cache-free greedy decode (re-runs the full prefix each step); used to
  /// cross-check the cache path.
  std::vector<int> greedy_decode_uncached(const std::vector<int>& src_ids,
                                          int max_new_tokens) const;

  void save_checkpoint(const std::string& path) const;
  static Seq2SeqModel load_checkpoint(const std::string& path);

  /// When set, every attention probability matrix from subsequent forwards
  /// is appended (debug/probe hook).
  mutable std::vector<Tensor>* attn_probe = nullptr;

  // Wired by build(); public for surgery and export walks.
  ParamPtr tok_emb;            // [vocab x d_model]; also the LM head when tied
  ParamPtr enc_pos, dec_pos;   // [max_seq_len x d_model]
  std::vector<EncoderBlock> encoder;
  std::vector<DecoderBlock> decoder;
  ParamPtr enc_final_ln, dec_final_ln;
  std::shared_ptr<LinearBase> lm_head;

 private:
  Tensor embed(Tape* tape, const std::vector<int>& ids, const ParamPtr& pos) const;
  Tensor attention(Tape* tape, const AttentionLayers& at, const Tensor& x_q,
                   const Tensor& x_kv, bool causal) const;

  ModelConfig cfg_;
  QuantMode mode_ = QuantMode::None;
  ReplaceOptions replace_opts_;
};

}  // namespace bitseq
