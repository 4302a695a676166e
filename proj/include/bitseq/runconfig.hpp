#pragma once

#include <string>
#include <vector>

#include "bitseq/bitlinear.hpp"
#include "bitseq/deploy.hpp"
#include "bitseq/model.hpp"
#include "bitseq/trainer.hpp"
#include "bitseq/trajtext.hpp"

namespace bitseq {

/// Flat key = value run configuration ('#' comments). Unknown keys are
/// rejected; resolved() renders every effective value so runs can drop a
/// fully-resolved copy next to their outputs.
struct RunConfig {
  ModelConfig model{2, 2, 64, 256, 4, 0 /*from vocab*/, 192, true};
  QuantMode quant_mode = QuantMode::Weight;
  float quant_eps = kQuantEps;
  BiasPolicy bias_policy = BiasPolicy::Literal;
  bool ste_clipped = true;

  TrainConfig train{};
  SamplingConfig sampling{0.7f, 96, 0};
  int eval_k = 20;
  int eval_pool = 0;  // stochastic draws per window; 0 means exactly eval_k

  int tokenizer_vocab_size = 224;
  SerializeOptions serialize{};

  // Either synthetic data or scene files.
  std::string synth_kind = "mixed";  // line|turn|crossing|mixed, empty when using files
  int synth_agents = 12;
  int synth_frames = 26;
  float synth_noise = 0.05f;
  std::vector<std::string> scene_files;
  std::string held_out;  // leave-one-out scene name
  int obs_len = 8;
  int fut_len = 12;
  int window_stride = 1;

  std::string encoding = "two_bit";  // export encoding
  std::uint64_t seed = 0;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text);
  std::string resolved() const;

  TernaryEncoding ternary_encoding() const;
};

}  // namespace bitseq
