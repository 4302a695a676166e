#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bitseq/bitlinear.hpp"
#include "bitseq/model.hpp"

namespace bitseq {

enum class TernaryEncoding : std::uint8_t {
  TwoBit = 0,   // 4 trits/byte: 00=0, 01=+1, 10=-1, 11 reserved, little-endian in byte
  Base243 = 1,  // 5 trits/byte: sum (t_i + 1) * 3^i
};

const char* to_string(TernaryEncoding e);

/// Bit-packed ternary matrix with the dequantization scale (1/beta). Rows are
/// packed independently (each row starts on a byte boundary).
struct PackedTernaryMatrix {
  int rows = 0;
  int cols = 0;
  TernaryEncoding encoding = TernaryEncoding::TwoBit;
  std::vector<std::uint8_t> payload;
  float scale = 1.0f;

  std::size_t bytes_per_row() const {
    return encoding == TernaryEncoding::TwoBit ? static_cast<std::size_t>((cols + 3) / 4)
                                               : static_cast<std::size_t>((cols + 4) / 5);
  }
};

/// Entries must be exactly -1, 0 or +1; anything else raises a FormatError
/// naming the offending coordinates. unpack(pack(T)) == T.
PackedTernaryMatrix pack_ternary(const Tensor& codes, TernaryEncoding encoding,
                                 float scale = 1.0f);
Tensor unpack_ternary(const PackedTernaryMatrix& p);

/// y = (x T^T + b) * scale (literal policy) or (x T^T) * scale + b
/// (post-dequant). The inner loop accumulates adds/subtracts straight off the
/// packed payload; no multiplies against weights.
std::vector<float> packed_matvec(const PackedTernaryMatrix& p, const std::vector<float>& x,
                                 const std::vector<float>* bias,
                                 BiasPolicy policy = BiasPolicy::Literal);

/// Reference path that unpacks first and runs the float product; the packed
/// path is benchmarked against this.
std::vector<float> matvec_via_unpack(const PackedTernaryMatrix& p, const std::vector<float>& x,
                                     const std::vector<float>* bias,
                                     BiasPolicy policy = BiasPolicy::Literal);

/// Inference-only linear running off packed ternary codes. For Both-mode
/// layers the activation path (LN + int8) still runs at forward time.
class PackedLinear final : public LinearBase {
 public:
  PackedLinear(PackedTernaryMatrix packed, ParamPtr b, QuantMode m, float eps_,
               BiasPolicy policy)
      : mode(m), eps(eps_), bias_policy(policy), packed_(std::move(packed)) {
    bias = std::move(b);
  }

  Tensor forward(Tape* tape, const Tensor& x) const override;
  const char* kind() const override { return "packed"; }
  int out_features() const override { return packed_.rows; }
  int in_features() const override { return packed_.cols; }

  const PackedTernaryMatrix& packed() const { return packed_; }

  QuantMode mode;
  float eps;
  BiasPolicy bias_policy;

 private:
  PackedTernaryMatrix packed_;
};

/// Frozen export of a QAT model: ternary-weight layers packed once, other
/// parameters full precision (embeddings optionally packed too, at an
/// accuracy cost).
struct DeployModel {
  Seq2SeqModel model;
  TernaryEncoding encoding = TernaryEncoding::TwoBit;
  bool embeddings_packed = false;
};

/// Deep-copies the model parameters into a fresh instance.
Seq2SeqModel clone_model(const Seq2SeqModel& src);

DeployModel export_deploy(const Seq2SeqModel& qat, TernaryEncoding encoding,
                          bool pack_embeddings = false);

void save_deploy(const DeployModel& dm, const std::string& path);
DeployModel load_deploy(const std::string& path);

struct MemoryRow {
  std::string name;
  std::string kind;  // "f32" | "two_bit" | "base243"
  std::int64_t elements = 0;
  std::int64_t bytes = 0;
};

struct MemoryReport {
  std::vector<MemoryRow> rows;
  std::int64_t total_bytes = 0;

  std::string to_csv() const;
};

MemoryReport memory_report(const Seq2SeqModel& model);
MemoryReport memory_report(const DeployModel& dm);

struct BenchConfig {
  int horizon = 12;          // max new tokens per sequence
  float temperature = 0.7f;
  int repeats = 10;
  int warmup = 2;
  std::uint64_t seed = 0;
  std::vector<int> src;      // prompt token ids
};

struct BenchStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double seq_per_s = 0.0;
  double total_s = 0.0;
  int repeats = 0;
  std::int64_t bytes_total = 0;

  std::string to_json() const;
};

/// Wall-clock per generated sequence (warmup excluded), batch of one.
BenchStats bench(const DeployModel& dm, const BenchConfig& cfg);

}  // namespace bitseq
