#include "bitseq/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace bitseq {

std::string TrainLog::to_csv() const {
  std::ostringstream os;
  os << "step,epoch,loss,grad_norm,lr\n";
  os.setf(std::ios::fixed);
  os.precision(6);
  for (const auto& r : rows)
    os << r.step << "," << r.epoch << "," << r.loss << "," << r.grad_norm << "," << r.lr << "\n";
  return os.str();
}

double TrainLog::smoothed_final_loss(int window) const {
  if (rows.empty()) return 0.0;
  const int n = std::min<int>(window, static_cast<int>(rows.size()));
  double sum = 0.0;
  for (int i = static_cast<int>(rows.size()) - n; i < static_cast<int>(rows.size()); ++i)
    sum += rows[static_cast<size_t>(i)].loss;
  return sum / n;
}

int TrainLog::steps_until_loss_below(double ratio) const {
  if (rows.empty()) return -1;
  const double threshold = ratio * rows.front().loss;
  for (const auto& r : rows)
    if (r.loss < threshold) return r.step;
  return -1;
}

std::vector<TokenizedWindow> tokenize_windows(const std::vector<TrajectoryWindow>& windows,
                                              const BpeVocab& vocab,
                                              const SerializeOptions& opts, int max_seq_len) {
  std::vector<TokenizedWindow> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    TokenizedWindow tw;
    tw.src = bpe_encode(vocab, serialize_window(w, opts));
    tw.tgt = bpe_encode(vocab, serialize_answer(w.fut, opts.precision));
    tw.tgt.push_back(BpeVocab::kEosId);
    if (static_cast<int>(tw.src.size()) > max_seq_len ||
        static_cast<int>(tw.tgt.size()) > max_seq_len)
      continue;
    out.push_back(std::move(tw));
  }
  return out;
}

float clip_global_norm(const std::vector<ParamPtr>& params, float max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (float g : p->grad.vec()) sq += static_cast<double>(g) * g;
  const float norm = static_cast<float>(std::sqrt(sq));
  if (norm > max_norm && norm > 0.0f) {
    const float s = max_norm / norm;
    for (const auto& p : params)
      for (float& g : p->grad.vec()) g *= s;
  }
  return norm;
}

AdamW::AdamW(std::vector<ParamPtr> params, const TrainConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p->value.vec().size(), 0.0f);
    v_.emplace_back(p->value.vec().size(), 0.0f);
  }
}

void AdamW::zero_grad() {
  for (const auto& p : params_) p->zero_grad();
}

void AdamW::step(float lr) {
  ++t_;
  const float bc1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(t_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    auto& p = *params_[pi];
    auto& val = p.value.vec();
    const auto& grad = p.grad.vec();
    auto& m = m_[pi];
    auto& v = v_[pi];
    const float wd = p.no_decay ? 0.0f : cfg_.weight_decay;
    for (size_t i = 0; i < val.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0f - cfg_.beta1) * grad[i];
      v[i] = cfg_.beta2 * v[i] + (1.0f - cfg_.beta2) * grad[i] * grad[i];
      const float mhat = m[i] / bc1;
      const float vhat = v[i] / bc2;
      val[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.adam_eps) + wd * val[i]);
    }
  }
}

namespace {

std::string first_non_finite(const Seq2SeqModel& model) {
  for (const auto& [name, p] : model.named_parameters()) {
    for (float v : p->value.vec())
      if (!std::isfinite(v)) return name + ".value";
    for (float g : p->grad.vec())
      if (!std::isfinite(g)) return name + ".grad";
  }
  return "loss only";
}

}  // namespace

TrainLog train(Seq2SeqModel& model, const std::vector<TokenizedWindow>& data,
               const TrainConfig& cfg, const std::vector<TokenizedWindow>& eval_data) {
  if (data.empty()) throw std::invalid_argument("train: no data");
  const int batch = std::max(1, std::min<int>(cfg.batch_size, static_cast<int>(data.size())));
  const int steps_per_epoch =
      (static_cast<int>(data.size()) + batch - 1) / batch;
  const int total_steps = steps_per_epoch * cfg.epochs;

  AdamW opt(model.parameters(), cfg);
  Rng shuffle_rng(cfg.seed);
  TrainLog log;
  const auto t_begin = std::chrono::steady_clock::now();

  std::vector<int> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(shuffle_rng.uniform_int(i + 1))]);
    for (int b = 0; b < steps_per_epoch; ++b) {
      const float lr =
          cfg.lr * (1.0f - static_cast<float>(step) / static_cast<float>(total_steps));
      Tape tape;
      Tensor total;
      int count = 0;
      for (int k = 0; k < batch; ++k) {
        const size_t idx = static_cast<size_t>(order[static_cast<size_t>(
            (b * batch + k) % static_cast<int>(order.size()))]);
        Tensor l = model.seq2seq_loss(&tape, data[idx].src, data[idx].tgt);
        total = count == 0 ? l : add(&tape, total, l);
        ++count;
      }
      Tensor loss = scale(&tape, total, 1.0f / static_cast<float>(count));
      const float loss_val = loss.at(0);
      if (!std::isfinite(loss_val)) throw TrainDivergence(step, lr, first_non_finite(model));

      opt.zero_grad();
      tape.backward(loss);
      const float gnorm = clip_global_norm(opt.params(), cfg.grad_clip_norm);
      if (!std::isfinite(gnorm)) throw TrainDivergence(step, lr, first_non_finite(model));
      opt.step(lr);
      log.rows.push_back({step, epoch, loss_val, gnorm, lr});
      ++step;
    }
    if (!eval_data.empty()) {
      double total_eval = 0.0;
      for (const auto& w : eval_data)
        total_eval += model.seq2seq_loss(nullptr, w.src, w.tgt).at(0);
      log.epoch_eval.push_back(
          {epoch, static_cast<float>(total_eval / static_cast<double>(eval_data.size()))});
    }
  }
  const auto t_end = std::chrono::steady_clock::now();
  log.mean_step_ms =
      std::chrono::duration<double, std::milli>(t_end - t_begin).count() / std::max(1, step);
  return log;
}

std::map<QuantMode, TrainLog> compare_variants(const ModelConfig& model_cfg,
                                               const std::vector<TokenizedWindow>& data,
                                               const TrainConfig& cfg,
                                               const std::vector<QuantMode>& modes,
                                               std::uint64_t build_seed) {
  std::map<QuantMode, TrainLog> out;
  for (QuantMode mode : modes) {
    Seq2SeqModel model = Seq2SeqModel::build(model_cfg, mode, build_seed);
    out[mode] = train(model, data, cfg);
  }
  return out;
}

std::vector<SweepRow> lr_sweep(const ModelConfig& model_cfg,
                               const std::vector<TokenizedWindow>& data, const TrainConfig& base,
                               const std::vector<float>& lrs, const std::vector<QuantMode>& modes,
                               std::uint64_t build_seed) {
  std::vector<SweepRow> rows;
  for (QuantMode mode : modes) {
    for (float lr : lrs) {
      TrainConfig cfg = base;
      cfg.lr = lr;
      SweepRow row{mode, lr, cfg.seed, false, "", 0.0, 0.0};
      try {
        Seq2SeqModel model = Seq2SeqModel::build(model_cfg, mode, build_seed);
        TrainLog log = train(model, data, cfg);
        row.final_loss = log.smoothed_final_loss();
        row.mean_step_ms = log.mean_step_ms;
        if (!log.rows.empty() && row.final_loss > 10.0 * log.rows.front().loss) {
          row.diverged = true;
          row.reason = "loss exceeded 10x initial";
        }
      } catch (const TrainDivergence& e) {
        row.diverged = true;
        row.reason = e.what();
        row.final_loss = std::numeric_limits<double>::quiet_NaN();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "mode,lr,seed,diverged,final_loss,mean_step_ms,reason\n";
  for (const auto& r : rows) {
    os << to_string(r.mode) << "," << r.lr << "," << r.seed << "," << (r.diverged ? 1 : 0) << ","
       << r.final_loss << "," << r.mean_step_ms << "," << r.reason << "\n";
  }
  return os.str();
}

}  // namespace bitseq
