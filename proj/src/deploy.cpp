#include "bitseq/deploy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "bitseq/errors.hpp"
#include "bitseq/quant.hpp"

namespace bitseq {

const char* to_string(TernaryEncoding e) {
  return e == TernaryEncoding::TwoBit ? "two_bit" : "base243";
}

// ---------------------------------------------------------------------------
// Packing
// ---------------------------------------------------------------------------

namespace {

// 243 -> 5 trits lookup, digits (t+1) in base 3, least significant first.
const std::int8_t (*trit_table())[5] {
  static std::int8_t table[243][5];
  static const bool init = [] {
    for (int b = 0; b < 243; ++b) {
      int rem = b;
      for (int i = 0; i < 5; ++i) {
        table[b][i] = static_cast<std::int8_t>(rem % 3 - 1);
        rem /= 3;
      }
    }
    return true;
  }();
  (void)init;
  return table;
}

int trit_at(const Tensor& codes, int r, int c) {
  const float v = codes.at(r, c);
  if (v != -1.0f && v != 0.0f && v != 1.0f)
    throw FormatError("pack_ternary: non-ternary entry " + std::to_string(v) + " at (" +
                      std::to_string(r) + ", " + std::to_string(c) + ")");
  return static_cast<int>(v);
}

}  // namespace

PackedTernaryMatrix pack_ternary(const Tensor& codes, TernaryEncoding encoding, float scale) {
  if (codes.ndim() != 2) throw std::invalid_argument("pack_ternary: expects a matrix");
  PackedTernaryMatrix p;
  p.rows = codes.rows();
  p.cols = codes.cols();
  p.encoding = encoding;
  p.scale = scale;
  p.payload.assign(static_cast<std::size_t>(p.rows) * p.bytes_per_row(), 0);

  for (int r = 0; r < p.rows; ++r) {
    std::uint8_t* row = p.payload.data() + static_cast<std::size_t>(r) * p.bytes_per_row();
    if (encoding == TernaryEncoding::TwoBit) {
      for (int c = 0; c < p.cols; ++c) {
        const int t = trit_at(codes, r, c);
        const std::uint8_t bits = t == 0 ? 0b00 : (t == 1 ? 0b01 : 0b10);
        row[c / 4] |= static_cast<std::uint8_t>(bits << (2 * (c % 4)));
      }
    } else {
      for (int c = 0; c < p.cols; ++c) {
        const int t = trit_at(codes, r, c);
        static const int pow3[5] = {1, 3, 9, 27, 81};
        row[c / 5] = static_cast<std::uint8_t>(row[c / 5] + (t + 1) * pow3[c % 5]);
      }
      // Byte padding trits are 0, which contributes 3^i each; fill them so a
      // padded byte stays a valid base-243 value.
      const int tail = p.cols % 5;
      if (tail != 0) {
        static const int pow3[5] = {1, 3, 9, 27, 81};
        for (int i = tail; i < 5; ++i)
          row[p.bytes_per_row() - 1] =
              static_cast<std::uint8_t>(row[p.bytes_per_row() - 1] + pow3[i]);
      }
    }
  }
  return p;
}

Tensor unpack_ternary(const PackedTernaryMatrix& p) {
  Tensor out({p.rows, p.cols});
  const auto* table = trit_table();
  for (int r = 0; r < p.rows; ++r) {
    const std::uint8_t* row = p.payload.data() + static_cast<std::size_t>(r) * p.bytes_per_row();
    if (p.encoding == TernaryEncoding::TwoBit) {
      for (int c = 0; c < p.cols; ++c) {
        const std::uint8_t bits = (row[c / 4] >> (2 * (c % 4))) & 0x3;
        if (bits == 0b11)
          throw FormatError("unpack_ternary: reserved 2-bit code at (" + std::to_string(r) +
                            ", " + std::to_string(c) + ")");
        out.at(r, c) = bits == 0b00 ? 0.0f : (bits == 0b01 ? 1.0f : -1.0f);
      }
    } else {
      for (int c = 0; c < p.cols; ++c)
        out.at(r, c) = static_cast<float>(table[row[c / 5]][c % 5]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

namespace {

// acc[r] = sum_c T[r,c] * x[c] via add/subtract only, ascending c.
void packed_accumulate(const PackedTernaryMatrix& p, const float* x, float* acc) {
  const auto* table = trit_table();
  const std::size_t bpr = p.bytes_per_row();
  for (int r = 0; r < p.rows; ++r) {
    const std::uint8_t* row = p.payload.data() + static_cast<std::size_t>(r) * bpr;
    float sum = 0.0f;
    if (p.encoding == TernaryEncoding::TwoBit) {
      int c = 0;
      for (std::size_t byte = 0; byte < bpr; ++byte) {
        std::uint8_t b = row[byte];
        for (int j = 0; j < 4 && c < p.cols; ++j, ++c) {
          const std::uint8_t bits = (b >> (2 * j)) & 0x3;
          if (bits == 0b01) sum += x[c];
          else if (bits == 0b10) sum -= x[c];
        }
      }
    } else {
      int c = 0;
      for (std::size_t byte = 0; byte < bpr; ++byte) {
        const std::int8_t* trits = table[row[byte]];
        for (int j = 0; j < 5 && c < p.cols; ++j, ++c) {
          if (trits[j] > 0) sum += x[c];
          else if (trits[j] < 0) sum -= x[c];
        }
      }
    }
    acc[r] = sum;
  }
}

std::vector<float> apply_bias_scale(std::vector<float> acc, const std::vector<float>* bias,
                                    float scale, BiasPolicy policy) {
  if (bias && bias->size() != acc.size())
    throw std::invalid_argument("packed_matvec: bias length mismatch");
  if (policy == BiasPolicy::Literal) {
    for (size_t i = 0; i < acc.size(); ++i)
      acc[i] = (acc[i] + (bias ? (*bias)[i] : 0.0f)) * scale;
  } else {
    for (size_t i = 0; i < acc.size(); ++i)
      acc[i] = acc[i] * scale + (bias ? (*bias)[i] : 0.0f);
  }
  return acc;
}

}  // namespace

std::vector<float> packed_matvec(const PackedTernaryMatrix& p, const std::vector<float>& x,
                                 const std::vector<float>* bias, BiasPolicy policy) {
  if (static_cast<int>(x.size()) != p.cols)
    throw std::invalid_argument("packed_matvec: input length " + std::to_string(x.size()) +
                                " does not match cols " + std::to_string(p.cols));
  std::vector<float> acc(static_cast<std::size_t>(p.rows), 0.0f);
  packed_accumulate(p, x.data(), acc.data());
  return apply_bias_scale(std::move(acc), bias, p.scale, policy);
}

std::vector<float> matvec_via_unpack(const PackedTernaryMatrix& p, const std::vector<float>& x,
                                     const std::vector<float>* bias, BiasPolicy policy) {
  if (static_cast<int>(x.size()) != p.cols)
    throw std::invalid_argument("matvec_via_unpack: input length mismatch");
  Tensor t = unpack_ternary(p);
  std::vector<float> acc(static_cast<std::size_t>(p.rows), 0.0f);
  for (int r = 0; r < p.rows; ++r) {
    float sum = 0.0f;
    for (int c = 0; c < p.cols; ++c) sum += x[static_cast<size_t>(c)] * t.at(r, c);
    acc[static_cast<size_t>(r)] = sum;
  }
  return apply_bias_scale(std::move(acc), bias, p.scale, policy);
}

// ---------------------------------------------------------------------------
// PackedLinear
// ---------------------------------------------------------------------------

Tensor PackedLinear::forward(Tape*, const Tensor& x) const {
  // Inference only; mirrors BitLinear's arithmetic so exported logits match
  // the frozen QAT model.
  Tensor input = x;
  std::vector<float> gamma(static_cast<size_t>(x.rows()), 1.0f);
  if (mode == QuantMode::Both) {
    Tensor xn = layer_norm(nullptr, x, eps);
    for (int i = 0; i < xn.rows(); ++i) {
      float mx = 0.0f;
      for (int j = 0; j < xn.cols(); ++j) mx = std::max(mx, std::fabs(xn.at(i, j)));
      gamma[static_cast<size_t>(i)] = 127.0f / (mx + eps);
    }
    input = Tensor(xn.shape());
    for (int i = 0; i < xn.rows(); ++i)
      for (int j = 0; j < xn.cols(); ++j)
        input.at(i, j) =
            round_clamp(xn.at(i, j) * gamma[static_cast<size_t>(i)], QuantRange::int8());
  }

  const float beta = packed_.scale != 0.0f ? 1.0f / packed_.scale : 1.0f;
  Tensor y({x.rows(), packed_.rows});
  std::vector<float> acc(static_cast<size_t>(packed_.rows));
  for (int i = 0; i < x.rows(); ++i) {
    packed_accumulate(packed_, input.data() + static_cast<size_t>(i) * input.cols(), acc.data());
    const float dequant = 1.0f / (beta * gamma[static_cast<size_t>(i)]);
    for (int o = 0; o < packed_.rows; ++o) {
      const float b = bias ? bias->value.at(o) : 0.0f;
      y.at(i, o) = bias_policy == BiasPolicy::Literal ? (acc[static_cast<size_t>(o)] + b) * dequant
                                                      : acc[static_cast<size_t>(o)] * dequant + b;
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

Seq2SeqModel clone_model(const Seq2SeqModel& src) {
  Seq2SeqModel dst = Seq2SeqModel::build(src.config(), src.quant_mode(), 0,
                                         src.replace_options());
  auto sp = src.named_parameters();
  auto dp = dst.named_parameters();
  if (sp.size() != dp.size()) throw std::logic_error("clone_model: parameter list mismatch");
  for (size_t i = 0; i < sp.size(); ++i) {
    if (sp[i].first != dp[i].first) throw std::logic_error("clone_model: parameter order mismatch");
    dp[i].second->value.vec() = sp[i].second->value.vec();
  }
  return dst;
}

namespace {

void for_each_slot(LayerTree& tree, const std::string& prefix,
                   const std::function<void(const std::string&, std::shared_ptr<LinearBase>&)>& fn) {
  const std::string path = prefix.empty() ? tree.name : prefix + "." + tree.name;
  if (tree.slot && *tree.slot) fn(path, *tree.slot);
  for (auto& c : tree.children) for_each_slot(c, path, fn);
}

}  // namespace

DeployModel export_deploy(const Seq2SeqModel& qat, TernaryEncoding encoding,
                          bool pack_embeddings) {
  DeployModel dm;
  dm.model = clone_model(qat);
  dm.encoding = encoding;

  LayerTree tree = dm.model.layer_tree();
  for_each_slot(tree, "", [&](const std::string&, std::shared_ptr<LinearBase>& slot) {
    auto* bl = dynamic_cast<BitLinear*>(slot.get());
    if (!bl) return;
    if (bl->mode != QuantMode::Weight && bl->mode != QuantMode::Both) return;
    auto [codes, beta] = quantize_weights_ternary(bl->weight->value, bl->eps);
    PackedTernaryMatrix packed = pack_ternary(codes, encoding, 1.0f / beta);
    slot = std::make_shared<PackedLinear>(std::move(packed), bl->bias, bl->mode, bl->eps,
                                          bl->bias_policy);
  });

  if (pack_embeddings) {
    auto [codes, beta] = quantize_weights_ternary(dm.model.tok_emb->value, kQuantEps);
    PackedTernaryMatrix packed = pack_ternary(codes, encoding, 1.0f / beta);
    // In-memory lookups run off the dequantized table, exactly what a
    // round-trip through the export file produces.
    Tensor deq = unpack_ternary(packed);
    for (auto& v : deq.vec()) v *= packed.scale;
    dm.model.tok_emb->value.vec() = deq.vec();
    dm.embeddings_packed = true;
  }
  return dm;
}

// ---------------------------------------------------------------------------
// Deploy file
// ---------------------------------------------------------------------------

namespace {

constexpr char kDeployMagic[8] = {'B', 'S', 'Q', 'D', 'E', 'P', 'L', '1'};
constexpr std::uint32_t kDeployVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError(std::string("deploy file truncated while reading ") + what);
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, const char* what) {
  const auto len = read_pod<std::uint32_t>(is, what);
  if (len > (1u << 20)) throw FormatError(std::string("deploy file: implausible length for ") + what);
  std::string s(len, '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  if (!is) throw FormatError(std::string("deploy file truncated while reading ") + what);
  return s;
}

void write_packed(std::ostream& os, const PackedTernaryMatrix& p) {
  write_pod<std::int32_t>(os, p.rows);
  write_pod<std::int32_t>(os, p.cols);
  write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(p.encoding));
  write_pod(os, p.scale);
  write_pod<std::uint64_t>(os, p.payload.size());
  os.write(reinterpret_cast<const char*>(p.payload.data()),
           static_cast<std::streamsize>(p.payload.size()));
}

PackedTernaryMatrix read_packed(std::istream& is) {
  PackedTernaryMatrix p;
  p.rows = read_pod<std::int32_t>(is, "rows");
  p.cols = read_pod<std::int32_t>(is, "cols");
  p.encoding = static_cast<TernaryEncoding>(read_pod<std::uint8_t>(is, "encoding"));
  p.scale = read_pod<float>(is, "scale");
  const auto len = read_pod<std::uint64_t>(is, "payload length");
  if (len != static_cast<std::uint64_t>(p.rows) * p.bytes_per_row())
    throw FormatError("deploy file: payload length inconsistent with matrix size");
  p.payload.resize(len);
  is.read(reinterpret_cast<char*>(p.payload.data()), static_cast<std::streamsize>(len));
  if (!is) throw FormatError("deploy file truncated inside packed payload");
  return p;
}

}  // namespace

void save_deploy(const DeployModel& dm, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open deploy file for writing: " + path);
  const auto& cfg = dm.model.config();
  os.write(kDeployMagic, sizeof(kDeployMagic));
  write_pod(os, kDeployVersion);
  write_pod<std::int32_t>(os, cfg.n_encoder_blocks);
  write_pod<std::int32_t>(os, cfg.n_decoder_blocks);
  write_pod<std::int32_t>(os, cfg.d_model);
  write_pod<std::int32_t>(os, cfg.d_ff);
  write_pod<std::int32_t>(os, cfg.n_heads);
  write_pod<std::int32_t>(os, cfg.vocab_size);
  write_pod<std::int32_t>(os, cfg.max_seq_len);
  write_pod<std::uint8_t>(os, cfg.tie_lm_head ? 1 : 0);
  write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(dm.model.quant_mode()));
  write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(dm.model.replace_options().bias_policy));
  write_pod<std::uint8_t>(os, dm.model.replace_options().ste_clipped ? 1 : 0);
  write_pod(os, dm.model.replace_options().eps);
  write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(dm.encoding));
  write_pod<std::uint8_t>(os, dm.embeddings_packed ? 1 : 0);

  // f32 entries first so the loader can fill parameters before surgery.
  auto params = dm.model.named_parameters();
  std::vector<std::pair<std::string, const PackedTernaryMatrix*>> packed;
  LayerTree tree = const_cast<Seq2SeqModel&>(dm.model).layer_tree();
  for_each_slot(tree, "", [&](const std::string& p, std::shared_ptr<LinearBase>& slot) {
    if (auto* pl = dynamic_cast<PackedLinear*>(slot.get()))
      packed.emplace_back(p, &pl->packed());
  });

  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.size() + packed.size()));
  for (const auto& [name, p] : params) {
    write_string(os, name);
    write_pod<std::uint8_t>(os, 0);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p->value.ndim()));
    for (int d : p->value.shape()) write_pod<std::int64_t>(os, d);
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
  }
  for (const auto& [name, p] : packed) {
    write_string(os, name);
    write_pod<std::uint8_t>(os, 1);
    write_packed(os, *p);
  }
  if (!os) throw IoError("write failed for deploy file: " + path);
}

DeployModel load_deploy(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open deploy file: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kDeployMagic, sizeof(kDeployMagic)) != 0)
    throw FormatError("not a deploy file (bad magic): " + path);
  if (read_pod<std::uint32_t>(is, "version") != kDeployVersion)
    throw FormatError("unsupported deploy file version");

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

  DeployModel dm;
  dm.encoding = static_cast<TernaryEncoding>(read_pod<std::uint8_t>(is, "encoding"));
  dm.embeddings_packed = read_pod<std::uint8_t>(is, "embeddings_packed") != 0;
  dm.model = Seq2SeqModel::build(cfg, mode, 0, opts);

  std::map<std::string, ParamPtr> by_name;
  for (auto& [name, p] : dm.model.named_parameters()) by_name[name] = p;

  std::set<std::string> filled;
  const auto n_entries = read_pod<std::uint32_t>(is, "entry count");
  LayerTree tree = dm.model.layer_tree();
  for (std::uint32_t e = 0; e < n_entries; ++e) {
    const std::string name = read_string(is, "entry name");
    const auto tag = read_pod<std::uint8_t>(is, "entry tag");
    if (tag == 0) {
      auto it = by_name.find(name);
      if (it == by_name.end()) throw FormatError("deploy file: unknown tensor '" + name + "'");
      const auto ndim = read_pod<std::uint32_t>(is, "ndim");
      std::vector<int> shape;
      for (std::uint32_t d = 0; d < ndim; ++d)
        shape.push_back(static_cast<int>(read_pod<std::int64_t>(is, "dim")));
      if (shape != it->second->value.shape())
        throw FormatError("deploy file: tensor '" + name + "' has mismatched shape");
      auto& vec = it->second->value.vec();
      is.read(reinterpret_cast<char*>(vec.data()),
              static_cast<std::streamsize>(vec.size() * sizeof(float)));
      if (!is) throw FormatError("deploy file truncated inside tensor '" + name + "'");
      filled.insert(name);
    } else if (tag == 1) {
      PackedTernaryMatrix packed = read_packed(is);
      if (name == "tok_emb") {
        Tensor deq = unpack_ternary(packed);
        for (auto& v : deq.vec()) v *= packed.scale;
        if (deq.shape() != dm.model.tok_emb->value.shape())
          throw FormatError("deploy file: packed embedding shape mismatch");
        dm.model.tok_emb->value.vec() = deq.vec();
        filled.insert("tok_emb");
        continue;
      }
      bool applied = false;
      for_each_slot(tree, "", [&](const std::string& p, std::shared_ptr<LinearBase>& slot) {
        if (p != name || applied) return;
        auto* bl = dynamic_cast<BitLinear*>(slot.get());
        if (!bl) throw FormatError("deploy file: '" + name + "' is not a quantizable layer");
        slot = std::make_shared<PackedLinear>(std::move(packed), bl->bias, bl->mode, bl->eps,
                                              bl->bias_policy);
        applied = true;
      });
      if (!applied) throw FormatError("deploy file: no layer at path '" + name + "'");
    } else {
      throw FormatError("deploy file: unknown entry tag");
    }
  }

  // Every surviving f32 parameter must have been filled.
  for (auto& [name, p] : dm.model.named_parameters())
    if (!filled.count(name))
      throw FormatError("deploy file: missing tensor '" + name + "'");
  return dm;
}

// ---------------------------------------------------------------------------
// Memory accounting
// ---------------------------------------------------------------------------

MemoryReport memory_report(const Seq2SeqModel& model) {
  MemoryReport rep;
  for (const auto& [name, p] : model.named_parameters()) {
    MemoryRow row;
    row.name = name;
    row.kind = "f32";
    row.elements = p->value.numel();
    row.bytes = row.elements * 4;
    rep.total_bytes += row.bytes;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

MemoryReport memory_report(const DeployModel& dm) {
  MemoryReport rep = memory_report(dm.model);
  LayerTree tree = const_cast<Seq2SeqModel&>(dm.model).layer_tree();
  for_each_slot(tree, "", [&](const std::string& path, std::shared_ptr<LinearBase>& slot) {
    auto* pl = dynamic_cast<PackedLinear*>(slot.get());
    if (!pl) return;
    MemoryRow row;
    row.name = path + ".weight";
    row.kind = to_string(pl->packed().encoding);
    row.elements = static_cast<std::int64_t>(pl->packed().rows) * pl->packed().cols;
    row.bytes = static_cast<std::int64_t>(pl->packed().payload.size()) + 4;  // + scale
    rep.total_bytes += row.bytes;
    rep.rows.push_back(std::move(row));
  });
  return rep;
}

std::string MemoryReport::to_csv() const {
  std::ostringstream os;
  os << "tensor,kind,elements,bytes\n";
  for (const auto& r : rows)
    os << r.name << "," << r.kind << "," << r.elements << "," << r.bytes << "\n";
  os << "TOTAL,,," << total_bytes << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

BenchStats bench(const DeployModel& dm, const BenchConfig& cfg) {
  if (cfg.repeats < 1) throw std::invalid_argument("bench: repeats must be >= 1");
  SamplingConfig sc;
  sc.temperature = cfg.temperature;
  sc.max_new_tokens = cfg.horizon;

  std::vector<int> src = cfg.src;
  if (src.empty()) src = {kPadId};

  for (int i = 0; i < cfg.warmup; ++i) {
    sc.seed = cfg.seed + 1000003ull * static_cast<std::uint64_t>(i);
    dm.model.sample(src, sc);
  }

  std::vector<double> times_ms;
  times_ms.reserve(static_cast<size_t>(cfg.repeats));
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < cfg.repeats; ++i) {
    sc.seed = cfg.seed + static_cast<std::uint64_t>(i);
    const auto s = std::chrono::steady_clock::now();
    dm.model.sample(src, sc);
    const auto e = std::chrono::steady_clock::now();
    times_ms.push_back(std::chrono::duration<double, std::milli>(e - s).count());
  }
  const auto t1 = std::chrono::steady_clock::now();

  BenchStats st;
  st.repeats = cfg.repeats;
  st.total_s = std::chrono::duration<double>(t1 - t0).count();
  for (double t : times_ms) st.mean_ms += t;
  st.mean_ms /= static_cast<double>(times_ms.size());
  std::sort(times_ms.begin(), times_ms.end());
  st.p50_ms = times_ms[times_ms.size() / 2];
  const size_t p95_idx = std::min(
      times_ms.size() - 1,
      static_cast<size_t>(std::ceil(0.95 * static_cast<double>(times_ms.size()))) - 1);
  st.p95_ms = times_ms[p95_idx];
  st.seq_per_s = static_cast<double>(cfg.repeats) / st.total_s;
  st.bytes_total = memory_report(dm).total_bytes;
  return st;
}

std::string BenchStats::to_json() const {
  nlohmann::json j;
  j["mean_ms"] = mean_ms;
  j["p50_ms"] = p50_ms;
  j["p95_ms"] = p95_ms;
  j["seq_per_s"] = seq_per_s;
  j["total_s"] = total_s;
  j["repeats"] = repeats;
  j["bytes_total"] = bytes_total;
  return j.dump(2);
}

}  // namespace bitseq
