#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "bitseq/bpe.hpp"
#include "bitseq/model.hpp"
#include "bitseq/trajtext.hpp"

namespace bitseq {

struct TrainConfig {
  float lr = 1e-4f;
  int epochs = 8;
  int batch_size = 128;
  float grad_clip_norm = 1.0f;
  float weight_decay = 0.01f;  // decoupled; skipped for no-decay params
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;
  std::uint64_t seed = 0;
  // Schedule is fixed: linear decay to zero over the total step count, no
  // warmup.
};

struct TrainLogRow {
  int step;
  int epoch;
  float loss;
  float grad_norm;  // pre-clip global norm
  float lr;
};

struct EpochEvalRow {
  int epoch;
  float eval_loss;  // teacher-forced loss on held-out windows
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  std::vector<EpochEvalRow> epoch_eval;
  double mean_step_ms = 0.0;

  std::string to_csv() const;
  /// Trailing mean of the last `window` losses.
  double smoothed_final_loss(int window = 50) const;
  /// First step whose loss drops below ratio * initial loss; -1 if never.
  int steps_until_loss_below(double ratio) const;
};

/// Training aborted on a non-finite loss; carries the diagnostic snapshot.
struct TrainDivergence : std::runtime_error {
  TrainDivergence(int step_, float lr_, std::string where_)
      : std::runtime_error("non-finite loss at step " + std::to_string(step_) + " (lr " +
                           std::to_string(lr_) + ", first non-finite: " + where_ + ")"),
        step(step_),
        lr(lr_),
        where(std::move(where_)) {}
  int step;
  float lr;
  std::string where;
};

struct TokenizedWindow {
  std::vector<int> src;
  std::vector<int> tgt;  // answer tokens, EOS-terminated
};

/// Serializes each window with the grammar, encodes with the vocab, and
/// appends EOS to the answer. Windows whose token streams exceed max_seq_len
/// are dropped.
std::vector<TokenizedWindow> tokenize_windows(const std::vector<TrajectoryWindow>& windows,
                                              const BpeVocab& vocab,
                                              const SerializeOptions& opts, int max_seq_len);

/// Scales all gradients so the global norm is at most max_norm. Returns the
/// pre-clip norm.
float clip_global_norm(const std::vector<ParamPtr>& params, float max_norm);

/// AdamW with decoupled weight decay and bias-corrected moments.
class AdamW {
 public:
  AdamW(std::vector<ParamPtr> params, const TrainConfig& cfg);
  void step(float lr);
  void zero_grad();
  const std::vector<ParamPtr>& params() const { return params_; }

 private:
  std::vector<ParamPtr> params_;
  std::vector<std::vector<float>> m_, v_;
  TrainConfig cfg_;
  int t_ = 0;
};

/// Teacher-forced QAT loop: shuffled batches per epoch, clip-by-global-norm,
/// linear lr decay to zero. Deterministic given the seed. Throws
/// TrainDivergence on a non-finite loss.
TrainLog train(Seq2SeqModel& model, const std::vector<TokenizedWindow>& data,
               const TrainConfig& cfg, const std::vector<TokenizedWindow>& eval_data = {});

/// Trains one fresh model per mode with identical seeds and data order.
std::map<QuantMode, TrainLog> compare_variants(const ModelConfig& model_cfg,
                                               const std::vector<TokenizedWindow>& data,
                                               const TrainConfig& cfg,
                                               const std::vector<QuantMode>& modes,
                                               std::uint64_t build_seed);

struct SweepRow {
  QuantMode mode;
  float lr;
  std::uint64_t seed;
  bool diverged;            // NaN abort or loss > 10x initial
  std::string reason;
  double final_loss;        // smoothed
  double mean_step_ms;
};

/// Stability grid over learning rates and modes.
std::vector<SweepRow> lr_sweep(const ModelConfig& model_cfg,
                               const std::vector<TokenizedWindow>& data, const TrainConfig& base,
                               const std::vector<float>& lrs, const std::vector<QuantMode>& modes,
                               std::uint64_t build_seed);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace bitseq
