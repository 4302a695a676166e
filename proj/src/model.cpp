#include "bitseq/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

#include "bitseq/errors.hpp"

namespace bitseq {

void ModelConfig::validate() const {
  if (n_encoder_blocks < 0 || n_decoder_blocks < 0)
    throw ConfigError("model: block counts must be non-negative");
  if (d_model <= 0 || d_ff <= 0 || n_heads <= 0 || vocab_size <= 0 || max_seq_len <= 0)
    throw ConfigError("model: dimensions must be positive");
  if (d_model % n_heads != 0)
    throw ConfigError("model: d_model " + std::to_string(d_model) +
                      " not divisible by n_heads " + std::to_string(n_heads));
}

namespace {

Tensor init_normal(Rng& rng, std::vector<int> shape, float std) {
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = rng.normal(0.0f, std);
  return t;
}

std::shared_ptr<LinearBase> make_linear(Rng& rng, const std::string& name, int out, int in,
                                        float w_std) {
  auto w = make_param(name + ".weight", init_normal(rng, {out, in}, w_std));
  auto b = make_param(name + ".bias", Tensor::zeros({out}), /*no_decay=*/true);
  return std::make_shared<PlainLinear>(std::move(w), std::move(b));
}

AttentionLayers make_attention(Rng& rng, const std::string& name, int d_model, float w_std) {
  AttentionLayers at;
  at.q = make_linear(rng, name + ".q", d_model, d_model, w_std);
  at.k = make_linear(rng, name + ".k", d_model, d_model, w_std);
  at.v = make_linear(rng, name + ".v", d_model, d_model, w_std);
  at.o = make_linear(rng, name + ".o", d_model, d_model, w_std);
  return at;
}

ParamPtr make_gain(const std::string& name, int d) {
  return make_param(name, Tensor::full({d}, 1.0f), /*no_decay=*/true);
}

}  // namespace

Seq2SeqModel Seq2SeqModel::build(const ModelConfig& cfg, QuantMode mode, std::uint64_t seed,
                                 const ReplaceOptions& opts) {
  cfg.validate();
  Seq2SeqModel m;
  m.cfg_ = cfg;
  m.mode_ = mode;
  m.replace_opts_ = opts;

  Rng rng(seed);
  const int n_blocks = std::max(1, cfg.n_encoder_blocks + cfg.n_decoder_blocks);
  const float w_std = 0.02f / std::sqrt(2.0f * static_cast<float>(n_blocks));

  m.tok_emb = make_param("tok_emb", init_normal(rng, {cfg.vocab_size, cfg.d_model}, 0.02f));
  m.enc_pos = make_param("enc_pos", init_normal(rng, {cfg.max_seq_len, cfg.d_model}, 0.02f));
  m.dec_pos = make_param("dec_pos", init_normal(rng, {cfg.max_seq_len, cfg.d_model}, 0.02f));

  m.encoder.resize(static_cast<size_t>(cfg.n_encoder_blocks));
  for (int b = 0; b < cfg.n_encoder_blocks; ++b) {
    const std::string base = "encoder.block" + std::to_string(b);
    auto& blk = m.encoder[static_cast<size_t>(b)];
    blk.ln_attn = make_gain(base + ".ln_attn", cfg.d_model);
    blk.self_attn = make_attention(rng, base + ".self_attn", cfg.d_model, w_std);
    blk.ln_ffn = make_gain(base + ".ln_ffn", cfg.d_model);
    blk.ffn.wi = make_linear(rng, base + ".ffn.wi", cfg.d_ff, cfg.d_model, w_std);
    blk.ffn.wo = make_linear(rng, base + ".ffn.wo", cfg.d_model, cfg.d_ff, w_std);
  }
  m.decoder.resize(static_cast<size_t>(cfg.n_decoder_blocks));
  for (int b = 0; b < cfg.n_decoder_blocks; ++b) {
    const std::string base = "decoder.block" + std::to_string(b);
    auto& blk = m.decoder[static_cast<size_t>(b)];
    blk.ln_self = make_gain(base + ".ln_self", cfg.d_model);
    blk.self_attn = make_attention(rng, base + ".self_attn", cfg.d_model, w_std);
    blk.ln_cross = make_gain(base + ".ln_cross", cfg.d_model);
    blk.cross_attn = make_attention(rng, base + ".cross_attn", cfg.d_model, w_std);
    blk.ln_ffn = make_gain(base + ".ln_ffn", cfg.d_model);
    blk.ffn.wi = make_linear(rng, base + ".ffn.wi", cfg.d_ff, cfg.d_model, w_std);
    blk.ffn.wo = make_linear(rng, base + ".ffn.wo", cfg.d_model, cfg.d_ff, w_std);
  }
  m.enc_final_ln = make_gain("encoder.final_ln", cfg.d_model);
  m.dec_final_ln = make_gain("decoder.final_ln", cfg.d_model);

  if (cfg.tie_lm_head) {
    m.lm_head = std::make_shared<PlainLinear>(m.tok_emb, nullptr);
  } else {
    auto w = make_param("lm_head.weight", init_normal(rng, {cfg.vocab_size, cfg.d_model}, w_std));
    m.lm_head = std::make_shared<PlainLinear>(std::move(w), nullptr);
  }

  LayerTree tree = m.layer_tree();
  replace_linear(tree, mode, opts);
  return m;
}

LayerTree Seq2SeqModel::layer_tree() {
  LayerTree root("model");
  auto add_attention = [](LayerTree& parent, const char* name, AttentionLayers& at) {
    LayerTree& n = parent.child(name);
    n.children.emplace_back("q", &at.q);
    n.children.emplace_back("k", &at.k);
    n.children.emplace_back("v", &at.v);
    n.children.emplace_back("o", &at.o);
  };
  LayerTree& enc = root.child("encoder");
  for (size_t b = 0; b < encoder.size(); ++b) {
    LayerTree& blk = enc.child("block" + std::to_string(b));
    add_attention(blk, "self_attn", encoder[b].self_attn);
    LayerTree& ffn = blk.child("ffn");
    ffn.children.emplace_back("wi", &encoder[b].ffn.wi);
    ffn.children.emplace_back("wo", &encoder[b].ffn.wo);
  }
  LayerTree& dec = root.child("decoder");
  for (size_t b = 0; b < decoder.size(); ++b) {
    LayerTree& blk = dec.child("block" + std::to_string(b));
    add_attention(blk, "self_attn", decoder[b].self_attn);
    add_attention(blk, "cross_attn", decoder[b].cross_attn);
    LayerTree& ffn = blk.child("ffn");
    ffn.children.emplace_back("wi", &decoder[b].ffn.wi);
    ffn.children.emplace_back("wo", &decoder[b].ffn.wo);
  }
  LayerTree& head = root.child("lm_head");
  head.children.emplace_back("proj", &lm_head);
  return root;
}

std::vector<std::pair<std::string, ParamPtr>> Seq2SeqModel::named_parameters() const {
  std::vector<std::pair<std::string, ParamPtr>> out;
  std::set<const Parameter*> seen;
  auto push = [&](const ParamPtr& p) {
    if (!p || seen.count(p.get())) return;
    seen.insert(p.get());
    out.emplace_back(p->name, p);
  };
  push(tok_emb);
  push(enc_pos);
  push(dec_pos);
  auto push_linear = [&](const std::shared_ptr<LinearBase>& l) {
    push(l->weight);
    push(l->bias);
    if (auto* bl = dynamic_cast<BitLinear*>(l.get())) push(bl->ln_gain);
  };
  auto push_attention = [&](const AttentionLayers& at) {
    push_linear(at.q);
    push_linear(at.k);
    push_linear(at.v);
    push_linear(at.o);
  };
  for (const auto& blk : encoder) {
    push(blk.ln_attn);
    push_attention(blk.self_attn);
    push(blk.ln_ffn);
    push_linear(blk.ffn.wi);
    push_linear(blk.ffn.wo);
  }
  for (const auto& blk : decoder) {
    push(blk.ln_self);
    push_attention(blk.self_attn);
    push(blk.ln_cross);
    push_attention(blk.cross_attn);
    push(blk.ln_ffn);
    push_linear(blk.ffn.wi);
    push_linear(blk.ffn.wo);
  }
  push(enc_final_ln);
  push(dec_final_ln);
  push_linear(lm_head);
  return out;
}

std::vector<ParamPtr> Seq2SeqModel::parameters() const {
  std::vector<ParamPtr> out;
  for (auto& [name, p] : named_parameters()) out.push_back(p);
  return out;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

Tensor Seq2SeqModel::embed(Tape* tape, const std::vector<int>& ids, const ParamPtr& pos) const {
  if (static_cast<int>(ids.size()) > cfg_.max_seq_len)
    throw std::length_error("sequence of " + std::to_string(ids.size()) +
                            " tokens exceeds max_seq_len " + std::to_string(cfg_.max_seq_len));
  for (int id : ids)
    if (id < 0 || id >= cfg_.vocab_size)
      throw std::out_of_range("token id " + std::to_string(id) + " outside vocab of " +
                              std::to_string(cfg_.vocab_size));
  Tensor tok = embedding_lookup(tape, tape ? tape->leaf(tok_emb) : tok_emb->value, ids);
  std::vector<int> pos_ids(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) pos_ids[i] = static_cast<int>(i);
  Tensor pe = embedding_lookup(tape, tape ? tape->leaf(pos) : pos->value, pos_ids);
  return add(tape, tok, pe);
}

Tensor Seq2SeqModel::attention(Tape* tape, const AttentionLayers& at, const Tensor& x_q,
                               const Tensor& x_kv, bool causal) const {
  const int d_head = cfg_.d_model / cfg_.n_heads;
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(d_head));
  Tensor q = at.q->forward(tape, x_q);
  Tensor k = at.k->forward(tape, x_kv);
  Tensor v = at.v->forward(tape, x_kv);
  std::vector<Tensor> heads;
  heads.reserve(static_cast<size_t>(cfg_.n_heads));
  for (int h = 0; h < cfg_.n_heads; ++h) {
    Tensor qh = slice_cols(tape, q, h * d_head, d_head);
    Tensor kh = slice_cols(tape, k, h * d_head, d_head);
    Tensor vh = slice_cols(tape, v, h * d_head, d_head);
    Tensor scores = scale(tape, matmul_nt(tape, qh, kh), inv_sqrt);
    if (causal) scores = causal_mask(tape, scores);
    Tensor probs = softmax(tape, scores);
    if (attn_probe) attn_probe->push_back(probs);
    heads.push_back(matmul(tape, probs, vh));
  }
  return at.o->forward(tape, concat_cols(tape, heads));
}

namespace {

Tensor norm_gained(Tape* tape, const Tensor& x, const ParamPtr& gain, float eps = 1e-6f) {
  Tensor n = layer_norm(tape, x, eps);
  return mul_rowvec(tape, n, tape ? tape->leaf(gain) : gain->value);
}

}  // namespace

Tensor Seq2SeqModel::encode(Tape* tape, const std::vector<int>& src_ids) const {
  Tensor x = embed(tape, src_ids, enc_pos);
  for (const auto& blk : encoder) {
    Tensor h = norm_gained(tape, x, blk.ln_attn);
    Tensor a = attention(tape, blk.self_attn, h, h, /*causal=*/false);
    x = add(tape, x, a);
    Tensor hf = norm_gained(tape, x, blk.ln_ffn);
    Tensor f = blk.ffn.wo->forward(tape, gelu(tape, blk.ffn.wi->forward(tape, hf)));
    x = add(tape, x, f);
  }
  return norm_gained(tape, x, enc_final_ln);
}

Tensor Seq2SeqModel::decoder_forward(Tape* tape, const std::vector<int>& tgt_in,
                                     const Tensor& memory) const {
  Tensor x = embed(tape, tgt_in, dec_pos);
  for (const auto& blk : decoder) {
    Tensor h = norm_gained(tape, x, blk.ln_self);
    x = add(tape, x, attention(tape, blk.self_attn, h, h, /*causal=*/true));
    Tensor hc = norm_gained(tape, x, blk.ln_cross);
    x = add(tape, x, attention(tape, blk.cross_attn, hc, memory, /*causal=*/false));
    Tensor hf = norm_gained(tape, x, blk.ln_ffn);
    x = add(tape, x, blk.ffn.wo->forward(tape, gelu(tape, blk.ffn.wi->forward(tape, hf))));
  }
  x = norm_gained(tape, x, dec_final_ln);
  return lm_head->forward(tape, x);
}

Tensor Seq2SeqModel::seq2seq_loss(Tape* tape, const std::vector<int>& src_ids,
                                  const std::vector<int>& tgt_out) const {
  std::vector<int> tgt_in(tgt_out.size());
  tgt_in[0] = kPadId;  // decoder start token
  for (size_t i = 1; i < tgt_out.size(); ++i) tgt_in[i] = tgt_out[i - 1];
  Tensor memory = encode(tape, src_ids);
  Tensor logits = decoder_forward(tape, tgt_in, memory);
  return cross_entropy(tape, logits, tgt_out, kPadId);
}

// ---------------------------------------------------------------------------
// Incremental decoding
// ---------------------------------------------------------------------------

DecodeState Seq2SeqModel::init_decode(const Tensor& memory) const {
  DecodeState st;
  st.self_cache.resize(decoder.size());
  st.cross_k.reserve(decoder.size());
  st.cross_v.reserve(decoder.size());
  for (const auto& blk : decoder) {
    st.cross_k.push_back(blk.cross_attn.k->forward(nullptr, memory));
    st.cross_v.push_back(blk.cross_attn.v->forward(nullptr, memory));
  }
  return st;
}

Tensor Seq2SeqModel::decode_step(DecodeState& state, const Tensor& memory, int token) const {
  (void)memory;
  const int d = cfg_.d_model;
  const int d_head = d / cfg_.n_heads;
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(d_head));
  if (state.step >= cfg_.max_seq_len)
    throw std::length_error("decode past max_seq_len " + std::to_string(cfg_.max_seq_len));
  if (token < 0 || token >= cfg_.vocab_size)
    throw std::out_of_range("token id " + std::to_string(token) + " outside vocab of " +
                            std::to_string(cfg_.vocab_size));

  Tensor tok = embedding_lookup(nullptr, tok_emb->value, {token});
  Tensor pe = embedding_lookup(nullptr, dec_pos->value, {state.step});
  Tensor x = add(nullptr, tok, pe);

  for (size_t bi = 0; bi < decoder.size(); ++bi) {
    const auto& blk = decoder[bi];
    auto& cache = state.self_cache[bi];

    Tensor h = norm_gained(nullptr, x, blk.ln_self);
    Tensor k_new = blk.self_attn.k->forward(nullptr, h);
    Tensor v_new = blk.self_attn.v->forward(nullptr, h);
    cache.k.insert(cache.k.end(), k_new.vec().begin(), k_new.vec().end());
    cache.v.insert(cache.v.end(), v_new.vec().begin(), v_new.vec().end());
    const int t = state.step + 1;
    Tensor K({t, d}, std::vector<float>(cache.k));
    Tensor V({t, d}, std::vector<float>(cache.v));
    Tensor q = blk.self_attn.q->forward(nullptr, h);
    std::vector<Tensor> heads;
    for (int hh = 0; hh < cfg_.n_heads; ++hh) {
      Tensor qh = slice_cols(nullptr, q, hh * d_head, d_head);
      Tensor kh = slice_cols(nullptr, K, hh * d_head, d_head);
      Tensor vh = slice_cols(nullptr, V, hh * d_head, d_head);
      Tensor probs = softmax(nullptr, scale(nullptr, matmul_nt(nullptr, qh, kh), inv_sqrt));
      if (attn_probe) attn_probe->push_back(probs);
      heads.push_back(matmul(nullptr, probs, vh));
    }
    x = add(nullptr, x, blk.self_attn.o->forward(nullptr, concat_cols(nullptr, heads)));

    Tensor hc = norm_gained(nullptr, x, blk.ln_cross);
    Tensor qc = blk.cross_attn.q->forward(nullptr, hc);
    std::vector<Tensor> cheads;
    for (int hh = 0; hh < cfg_.n_heads; ++hh) {
      Tensor qh = slice_cols(nullptr, qc, hh * d_head, d_head);
      Tensor kh = slice_cols(nullptr, state.cross_k[bi], hh * d_head, d_head);
      Tensor vh = slice_cols(nullptr, state.cross_v[bi], hh * d_head, d_head);
      Tensor probs = softmax(nullptr, scale(nullptr, matmul_nt(nullptr, qh, kh), inv_sqrt));
      if (attn_probe) attn_probe->push_back(probs);
      cheads.push_back(matmul(nullptr, probs, vh));
    }
    x = add(nullptr, x, blk.cross_attn.o->forward(nullptr, concat_cols(nullptr, cheads)));

    Tensor hf = norm_gained(nullptr, x, blk.ln_ffn);
    x = add(nullptr, x, blk.ffn.wo->forward(nullptr, gelu(nullptr, blk.ffn.wi->forward(nullptr, hf))));
  }
  x = norm_gained(nullptr, x, dec_final_ln);
  state.step += 1;
  return lm_head->forward(nullptr, x);
}

std::vector<int> Seq2SeqModel::sample(const std::vector<int>& src_ids,
                                      const SamplingConfig& sc) const {
  if (sc.temperature < 0.0f) throw std::invalid_argument("sample: temperature must be >= 0");
  Tensor memory = encode(nullptr, src_ids);
  DecodeState st = init_decode(memory);
  Rng rng(sc.seed);
  std::vector<int> out;
  int token = kPadId;
  for (int i = 0; i < sc.max_new_tokens; ++i) {
    Tensor logits = decode_step(st, memory, token);
    int next;
    if (sc.temperature == 0.0f) {
      next = 0;
      for (int j = 1; j < logits.cols(); ++j)
        if (logits.at(0, j) > logits.at(0, next)) next = j;
    } else {
      Tensor probs = softmax(nullptr, scale(nullptr, logits, 1.0f / sc.temperature));
      next = rng.categorical(probs.vec());
    }
    out.push_back(next);
    st.generated.push_back(next);
    if (next == kEosId) break;
    token = next;
  }
  return out;
}

std::vector<int> Seq2SeqModel::greedy_decode_uncached(const std::vector<int>& src_ids,
                                                      int max_new_tokens) const {
  Tensor memory = encode(nullptr, src_ids);
  std::vector<int> prefix = {kPadId};
  std::vector<int> out;
  for (int i = 0; i < max_new_tokens; ++i) {
    Tensor logits = decoder_forward(nullptr, prefix, memory);
    const int last = logits.rows() - 1;
    int next = 0;
    for (int j = 1; j < logits.cols(); ++j)
      if (logits.at(last, j) > logits.at(last, next)) next = j;
    out.push_back(next);
    if (next == kEosId) break;
    prefix.push_back(next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'B', 'S', 'Q', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError(std::string("checkpoint truncated while reading ") + what);
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, const char* what) {
  const auto len = read_pod<std::uint32_t>(is, what);
  if (len > (1u << 20)) throw FormatError(std::string("checkpoint: implausible length for ") + what);
  std::string s(len, '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  if (!is) throw FormatError(std::string("checkpoint truncated while reading ") + what);
  return s;
}

}  // namespace

void Seq2SeqModel::save_checkpoint(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kVersion);
  write_pod<std::int32_t>(os, cfg_.n_encoder_blocks);
  write_pod<std::int32_t>(os, cfg_.n_decoder_blocks);
  write_pod<std::int32_t>(os, cfg_.d_model);
  write_pod<std::int32_t>(os, cfg_.d_ff);
  write_pod<std::int32_t>(os, cfg_.n_heads);
  write_pod<std::int32_t>(os, cfg_.vocab_size);
  write_pod<std::int32_t>(os, cfg_.max_seq_len);
  write_pod<std::uint8_t>(os, cfg_.tie_lm_head ? 1 : 0);
  write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(mode_));
  write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(replace_opts_.bias_policy));
  write_pod<std::uint8_t>(os, replace_opts_.ste_clipped ? 1 : 0);
  write_pod(os, replace_opts_.eps);
  write_pod<std::int32_t>(os, kPadId);
  write_pod<std::int32_t>(os, kEosId);

  const auto params = named_parameters();
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, p] : params) {
    write_string(os, name);
    write_pod<std::uint8_t>(os, 0);  // dtype f32
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p->value.ndim()));
    for (int d : p->value.shape()) write_pod<std::int64_t>(os, d);
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
  }
  if (!os) throw IoError("write failed for checkpoint: " + path);
}

Seq2SeqModel Seq2SeqModel::load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a checkpoint file (bad magic): " + path);
  const auto version = read_pod<std::uint32_t>(is, "version");
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));

  ModelConfig cfg;
  cfg.n_encoder_blocks = read_pod<std::int32_t>(is, "n_encoder_blocks");
  cfg.n_decoder_blocks = read_pod<std::int32_t>(is, "n_decoder_blocks");
  cfg.d_model = read_pod<std::int32_t>(is, "d_model");
  cfg.d_ff = read_pod<std::int32_t>(is, "d_ff");
  cfg.n_heads = read_pod<std::int32_t>(is, "n_heads");
  cfg.vocab_size = read_pod<std::int32_t>(is, "vocab_size");
  cfg.max_seq_len = read_pod<std::int32_t>(is, "max_seq_len");
  cfg.tie_lm_head = read_pod<std::uint8_t>(is, "tie_lm_head") != 0;
  const auto mode = static_cast<QuantMode>(read_pod<std::uint8_t>(is, "quant_mode"));
  ReplaceOptions opts;
  opts.bias_policy = static_cast<BiasPolicy>(read_pod<std::uint8_t>(is, "bias_policy"));
  opts.ste_clipped = read_pod<std::uint8_t>(is, "ste_clipped") != 0;
  opts.eps = read_pod<float>(is, "quant_eps");
  const auto pad = read_pod<std::int32_t>(is, "pad_id");
  const auto eos = read_pod<std::int32_t>(is, "eos_id");
  if (pad != kPadId || eos != kEosId)
    throw FormatError("checkpoint special token ids differ from pad=0/eos=1");

  Seq2SeqModel m = build(cfg, mode, /*seed=*/0, opts);
  auto params = m.named_parameters();

  const auto n_tensors = read_pod<std::uint32_t>(is, "tensor count");
  if (n_tensors != params.size())
    throw FormatError("checkpoint holds " + std::to_string(n_tensors) + " tensors, model needs " +
                      std::to_string(params.size()));
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = read_string(is, "tensor name");
    if (name != params[i].first)
      throw FormatError("checkpoint tensor '" + name + "' where '" + params[i].first +
                        "' was expected");
    const auto dtype = read_pod<std::uint8_t>(is, "dtype");
    if (dtype != 0) throw FormatError("tensor '" + name + "' has unsupported dtype");
    const auto ndim = read_pod<std::uint32_t>(is, "ndim");
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < ndim; ++d)
      shape.push_back(static_cast<int>(read_pod<std::int64_t>(is, "dim")));
    if (shape != params[i].second->value.shape())
      throw FormatError("tensor '" + name + "' has mismatched shape");
    auto& vec = params[i].second->value.vec();
    is.read(reinterpret_cast<char*>(vec.data()),
            static_cast<std::streamsize>(vec.size() * sizeof(float)));
    if (!is) throw FormatError("checkpoint truncated inside tensor '" + name + "'");
  }
  return m;
}

}  // namespace bitseq
