// bitseq command-line driver: tokenizer-train, train, eval, sweep, export,
// bench, report. Every run writes its fully-resolved config next to its
// outputs and never writes outside --out-dir.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include <json.hpp>

#include "bitseq/bpe.hpp"
#include "bitseq/deploy.hpp"
#include "bitseq/errors.hpp"
#include "bitseq/metrics.hpp"
#include "bitseq/model.hpp"
#include "bitseq/runconfig.hpp"
#include "bitseq/trainer.hpp"
#include "bitseq/trajdata.hpp"
#include "bitseq/trajtext.hpp"

namespace fs = std::filesystem;
using namespace bitseq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitFormat = 4;

fs::path resolve_out_dir(const std::string& dir) {
  fs::path p(dir);
  if (p.is_relative()) {
    if (const char* root = std::getenv("BITSEQ_OUT_ROOT")) p = fs::path(root) / p;
  }
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct LoadedScene {
  SceneTable table;
  Homography homography{1, 0, 0, 0, 1, 0, 0, 0, 1};
};

// Scene files may carry a sidecar "<path>.H" homography (3x3 floats).
std::vector<LoadedScene> load_data(const RunConfig& cfg) {
  std::vector<LoadedScene> scenes;
  if (!cfg.scene_files.empty()) {
    for (const auto& path : cfg.scene_files) {
      LoadedScene s;
      s.table = load_scene(path);
      const std::string hpath = path + ".H";
      if (fs::exists(hpath)) s.homography = load_homography(hpath);
      if (s.table.homography) s.homography = *s.table.homography;
      scenes.push_back(std::move(s));
    }
    return scenes;
  }
  auto add_synth = [&](SynthKind kind, std::uint64_t salt) {
    LoadedScene s;
    s.table = synth_scene(kind, cfg.synth_agents, cfg.synth_noise, cfg.seed + salt,
                          cfg.synth_frames);
    scenes.push_back(std::move(s));
  };
  if (cfg.synth_kind == "mixed") {
    add_synth(SynthKind::Line, 1);
    add_synth(SynthKind::Turn, 2);
    add_synth(SynthKind::Crossing, 3);
  } else {
    auto kind = synth_kind_from_string(cfg.synth_kind);
    if (!kind)
      throw ConfigError("config: bad data.synth '" + cfg.synth_kind +
                        "' (line|turn|crossing|mixed)");
    add_synth(*kind, 1);
  }
  return scenes;
}

std::vector<TrajectoryWindow> windows_of(const RunConfig& cfg,
                                         const std::vector<LoadedScene>& scenes,
                                         const std::optional<std::string>& only_scene) {
  std::vector<TrajectoryWindow> out;
  for (const auto& s : scenes) {
    if (only_scene && s.table.name != *only_scene) continue;
    auto wins = make_windows(s.table, cfg.obs_len, cfg.fut_len, cfg.window_stride,
                             cfg.serialize.max_neighbors);
    out.insert(out.end(), wins.begin(), wins.end());
  }
  return out;
}

std::vector<std::string> scene_names(const std::vector<LoadedScene>& scenes) {
  std::vector<std::string> names;
  for (const auto& s : scenes) names.push_back(s.table.name);
  return names;
}

// Train-split windows honoring the leave-one-out setting.
std::vector<TrajectoryWindow> train_windows(const RunConfig& cfg,
                                            const std::vector<LoadedScene>& scenes) {
  if (cfg.held_out.empty()) return windows_of(cfg, scenes, std::nullopt);
  SceneSplit split = leave_one_out_split(scene_names(scenes), cfg.held_out);
  std::vector<TrajectoryWindow> out;
  for (const auto& name : split.train) {
    auto wins = windows_of(cfg, scenes, name);
    out.insert(out.end(), wins.begin(), wins.end());
  }
  if (out.empty() && !split.train.empty())
    throw FormatError("no training windows from scenes (tracks too short?)");
  return out;
}

int run_tokenizer_train(const RunConfig& cfg, const fs::path& out) {
  auto scenes = load_data(cfg);
  auto wins = train_windows(cfg, scenes);
  if (wins.empty()) throw FormatError("no windows available for tokenizer training");
  std::vector<std::string> corpus;
  for (const auto& w : wins) {
    corpus.push_back(serialize_window(w, cfg.serialize));
    corpus.push_back(serialize_answer(w.fut, cfg.serialize.precision));
  }
  BpeVocab vocab = train_bpe(corpus, cfg.tokenizer_vocab_size);
  save_vocab(vocab, (out / "vocab.txt").string());
  write_text(out / "resolved.cfg", cfg.resolved());
  std::cout << "vocab of " << vocab.size() << " tokens (" << vocab.merges.size()
            << " merges) -> " << (out / "vocab.txt").string() << "\n";
  return kExitOk;
}

ModelConfig model_config_for(const RunConfig& cfg, const BpeVocab& vocab) {
  ModelConfig mc = cfg.model;
  mc.vocab_size = vocab.size();
  return mc;
}

int run_train(const RunConfig& cfg, const fs::path& out, const std::string& vocab_path) {
  BpeVocab vocab = load_vocab(vocab_path);
  auto scenes = load_data(cfg);
  auto wins = train_windows(cfg, scenes);
  auto data = tokenize_windows(wins, vocab, cfg.serialize, cfg.model.max_seq_len);
  if (data.empty()) throw FormatError("no tokenized windows fit max_seq_len");

  // Held-out windows feed a cheap per-epoch teacher-forced eval loss.
  std::vector<TokenizedWindow> eval_data;
  if (!cfg.held_out.empty())
    eval_data = tokenize_windows(windows_of(cfg, scenes, cfg.held_out), vocab, cfg.serialize,
                                 cfg.model.max_seq_len);

  ModelConfig mc = model_config_for(cfg, vocab);
  ReplaceOptions opts{cfg.quant_eps, cfg.bias_policy, cfg.ste_clipped};
  Seq2SeqModel model = Seq2SeqModel::build(mc, cfg.quant_mode, cfg.seed, opts);
  TrainLog log = train(model, data, cfg.train, eval_data);

  model.save_checkpoint((out / "checkpoint.bsq").string());
  write_text(out / "trainlog.csv", log.to_csv());
  if (!log.epoch_eval.empty()) {
    std::ostringstream ev;
    ev << "epoch,eval_loss\n";
    for (const auto& r : log.epoch_eval) ev << r.epoch << "," << r.eval_loss << "\n";
    write_text(out / "evallog.csv", ev.str());
  }
  write_text(out / "resolved.cfg", cfg.resolved());
  std::cout << "trained " << log.rows.size() << " steps on " << data.size()
            << " windows; final smoothed loss " << log.smoothed_final_loss() << "\n";
  return kExitOk;
}

// One window scored: K samples, failures fall back to repeating the last
// observed point and are counted separately.
struct WindowScore {
  double ade, fde;
  bool failed;
};

WindowScore score_window(const Seq2SeqModel& model, const BpeVocab& vocab,
                         const TrajectoryWindow& w, const RunConfig& cfg,
                         const Homography& h, std::uint64_t salt) {
  const std::string prompt = serialize_window(w, cfg.serialize);
  const auto src = bpe_encode(vocab, prompt);

  PredictionSet pred;
  pred.gt = project_homography(w.fut, h);
  bool any_failure = false;
  SamplingConfig sc = cfg.sampling;
  // Draw `pool` stochastic samples; the metric uses a uniform K-subset of
  // them, so the draw count and the best-of-K statistic stay independent.
  const int pool = std::max(cfg.eval_pool, cfg.eval_k);
  std::vector<int> picked(static_cast<size_t>(pool));
  for (int i = 0; i < pool; ++i) picked[static_cast<size_t>(i)] = i;
  if (pool > cfg.eval_k) {
    Rng subset_rng(cfg.seed * 7919ull + salt);
    for (int i = pool - 1; i > 0; --i)
      std::swap(picked[static_cast<size_t>(i)],
                picked[static_cast<size_t>(subset_rng.uniform_int(i + 1))]);
    picked.resize(static_cast<size_t>(cfg.eval_k));
  }
  std::sort(picked.begin(), picked.end());
  for (int k : picked) {
    sc.seed = cfg.seed * 1000003ull + salt * 101ull + static_cast<std::uint64_t>(k);
    std::vector<int> ids;
    bool ok = true;
    try {
      ids = model.sample(src, sc);
    } catch (const std::length_error&) {
      ok = false;
    }
    std::vector<Point> traj;
    if (ok) {
      if (!ids.empty() && ids.back() == kEosId) ids.pop_back();
      const std::string text = bpe_decode(vocab, ids);
      auto parsed = parse_answer(text, static_cast<size_t>(4 * cfg.fut_len));
      if (auto* pts = std::get_if<std::vector<Point>>(&parsed);
          pts && static_cast<int>(pts->size()) >= cfg.fut_len) {
        traj.assign(pts->begin(), pts->begin() + cfg.fut_len);
      } else {
        ok = false;
      }
    }
    if (!ok) {
      any_failure = true;
      traj.assign(static_cast<size_t>(cfg.fut_len), w.obs.back());  // constant-position fallback
    }
    pred.samples.push_back(project_homography(traj, h));
  }
  return {min_ade(pred), min_fde(pred), any_failure};
}

int run_eval(const RunConfig& cfg, const fs::path& out, const std::string& vocab_path,
             const std::string& ckpt_path, const std::string& baseline_path) {
  BpeVocab vocab = load_vocab(vocab_path);
  Seq2SeqModel model = Seq2SeqModel::load_checkpoint(ckpt_path);
  auto scenes = load_data(cfg);

  std::vector<SceneResult> results;
  for (const auto& s : scenes) {
    if (!cfg.held_out.empty() && s.table.name != cfg.held_out) continue;
    auto wins = windows_of(cfg, scenes, s.table.name);
    if (wins.empty()) continue;
    SceneResult r;
    r.scene = s.table.name;
    r.variant = to_string(model.quant_mode());
    r.samples = cfg.eval_k;
    int failures = 0;
    for (size_t i = 0; i < wins.size(); ++i) {
      WindowScore ws = score_window(model, vocab, wins[i], cfg, s.homography, i);
      r.ade += ws.ade;
      r.fde += ws.fde;
      failures += ws.failed ? 1 : 0;
    }
    r.ade /= static_cast<double>(wins.size());
    r.fde /= static_cast<double>(wins.size());
    r.failure_rate = static_cast<double>(failures) / static_cast<double>(wins.size());
    results.push_back(std::move(r));
  }
  if (results.empty()) throw FormatError("eval produced no scene results");

  std::vector<SceneResult> baseline;
  if (!baseline_path.empty()) baseline = scene_results_from_csv(read_text(baseline_path));
  const std::string csv = report_to_csv(aggregate(results, baseline));
  write_text(out / "metrics.csv", csv);
  write_text(out / "resolved.cfg", cfg.resolved());
  std::cout << csv;
  return kExitOk;
}

int run_sweep(const RunConfig& cfg, const fs::path& out, const std::string& vocab_path,
              std::vector<float> lrs, std::vector<std::string> mode_names) {
  BpeVocab vocab = load_vocab(vocab_path);
  auto scenes = load_data(cfg);
  auto data = tokenize_windows(train_windows(cfg, scenes), vocab, cfg.serialize,
                               cfg.model.max_seq_len);
  if (data.empty()) throw FormatError("no tokenized windows fit max_seq_len");
  if (lrs.empty()) lrs = {1e-4f, 2e-4f, 4e-4f};
  std::vector<QuantMode> modes;
  if (mode_names.empty()) mode_names = {"none", "both", "activ", "weight"};
  for (const auto& name : mode_names) {
    auto m = quant_mode_from_string(name);
    if (!m) throw ConfigError("bad --modes entry '" + name + "'");
    modes.push_back(*m);
  }
  auto rows = lr_sweep(model_config_for(cfg, vocab), data, cfg.train, lrs, modes, cfg.seed);
  write_text(out / "sweep.csv", sweep_to_csv(rows));
  write_text(out / "resolved.cfg", cfg.resolved());
  std::cout << sweep_to_csv(rows);
  return kExitOk;
}

int run_export(const RunConfig& cfg, const fs::path& out, const std::string& ckpt_path,
               bool pack_embeddings) {
  Seq2SeqModel model = Seq2SeqModel::load_checkpoint(ckpt_path);
  DeployModel dm = export_deploy(model, cfg.ternary_encoding(), pack_embeddings);
  save_deploy(dm, (out / "model.bsqx").string());
  MemoryReport packed = memory_report(dm);
  MemoryReport fp = memory_report(model);
  write_text(out / "memory.csv", packed.to_csv());
  write_text(out / "resolved.cfg", cfg.resolved());
  std::cout << "exported " << (out / "model.bsqx").string() << "\n"
            << "bytes packed=" << packed.total_bytes << " fp32=" << fp.total_bytes << " ratio="
            << static_cast<double>(packed.total_bytes) / static_cast<double>(fp.total_bytes)
            << "\n";
  return kExitOk;
}

int run_bench(const RunConfig& cfg, const fs::path& out, const std::string& deploy_path,
              const std::string& vocab_path, int repeats, int warmup) {
  DeployModel dm = load_deploy(deploy_path);
  BenchConfig bc;
  bc.horizon = cfg.sampling.max_new_tokens;
  bc.temperature = cfg.sampling.temperature;
  bc.repeats = repeats;
  bc.warmup = warmup;
  bc.seed = cfg.seed;
  if (!vocab_path.empty()) {
    BpeVocab vocab = load_vocab(vocab_path);
    auto scenes = load_data(cfg);
    auto wins = windows_of(cfg, scenes, std::nullopt);
    if (!wins.empty()) bc.src = bpe_encode(vocab, serialize_window(wins[0], cfg.serialize));
  }
  BenchStats st = bench(dm, bc);
  write_text(out / "bench.json", st.to_json());
  write_text(out / "resolved.cfg", cfg.resolved());
  std::cout << st.to_json() << "\n";
  return kExitOk;
}

int run_report(const fs::path& in_dir, const fs::path& out) {
  std::ostringstream rep;
  rep << "run summary for " << in_dir.string() << "\n\n";
  std::vector<fs::path> dirs{in_dir};
  for (const auto& e : fs::directory_iterator(in_dir))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());

  for (const auto& dir : dirs) {
    const bool any = fs::exists(dir / "trainlog.csv") || fs::exists(dir / "metrics.csv") ||
                     fs::exists(dir / "sweep.csv") || fs::exists(dir / "bench.json");
    if (!any) continue;
    rep << "== " << dir.filename().string() << " ==\n";
    if (fs::exists(dir / "resolved.cfg")) {
      const std::string cfg = read_text(dir / "resolved.cfg");
      for (const char* key : {"quant.mode", "train.lr", "seed"}) {
        const auto pos = cfg.find(key);
        if (pos != std::string::npos)
          rep << "  " << cfg.substr(pos, cfg.find('\n', pos) - pos) << "\n";
      }
    }
    if (fs::exists(dir / "trainlog.csv")) {
      std::istringstream is(read_text(dir / "trainlog.csv"));
      std::string line, last;
      std::getline(is, line);  // header
      double tail_sum = 0.0;
      std::vector<double> losses;
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        last = line;
        const auto c1 = line.find(',', line.find(',') + 1);
        losses.push_back(std::stod(line.substr(c1 + 1)));
      }
      const size_t n = std::min<size_t>(50, losses.size());
      for (size_t i = losses.size() - n; i < losses.size(); ++i) tail_sum += losses[i];
      rep << "  steps: " << losses.size() << ", first loss: " << (losses.empty() ? 0.0 : losses[0])
          << ", smoothed final loss: " << (n ? tail_sum / static_cast<double>(n) : 0.0) << "\n";
    }
    for (const char* csv : {"metrics.csv", "sweep.csv"}) {
      if (fs::exists(dir / csv)) {
        rep << "  " << csv << ":\n";
        std::istringstream is(read_text(dir / csv));
        std::string line;
        while (std::getline(is, line))
          if (!line.empty()) rep << "    " << line << "\n";
      }
    }
    if (fs::exists(dir / "bench.json")) {
      auto j = nlohmann::json::parse(read_text(dir / "bench.json"));
      rep << "  bench: mean " << j["mean_ms"] << " ms, p95 " << j["p95_ms"] << " ms, "
          << j["seq_per_s"] << " seq/s, " << j["bytes_total"] << " bytes\n";
    }
    rep << "\n";
  }
  write_text(out / "report.txt", rep.str());
  std::cout << rep.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"selective ternary/int8 quantization for a seq2seq trajectory predictor"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", vocab_path, ckpt_path, deploy_path;
  std::string baseline_path, in_dir;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> scene_override;
  std::vector<float> lrs;
  std::vector<std::string> modes;
  bool pack_embeddings = false;
  int repeats = 20, warmup = 3;

  auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
    if (needs_config)
      cmd->add_option("--config", config_path, "run configuration file")->required();
    cmd->add_option("--out-dir", out_dir, "output directory (BITSEQ_OUT_ROOT prefixes relative paths)");
    cmd->add_option("--seed", seed_override, "override the config seed");
    cmd->add_option("--scene", scene_override, "override data.held_out (leave-one-out scene)");
  };

  auto* c_tok = app.add_subcommand("tokenizer-train", "fit the trajectory BPE vocabulary");
  add_common(c_tok);

  auto* c_train = app.add_subcommand("train", "quantization-aware training run");
  add_common(c_train);
  c_train->add_option("--vocab", vocab_path, "vocab file from tokenizer-train")->required();

  auto* c_eval = app.add_subcommand("eval", "best-of-K displacement metrics on the held-out scene");
  add_common(c_eval);
  c_eval->add_option("--vocab", vocab_path)->required();
  c_eval->add_option("--checkpoint", ckpt_path)->required();
  c_eval->add_option("--baseline", baseline_path, "metrics.csv to diff against");

  auto* c_sweep = app.add_subcommand("sweep", "learning-rate x mode stability grid");
  add_common(c_sweep);
  c_sweep->add_option("--vocab", vocab_path)->required();
  c_sweep->add_option("--lrs", lrs, "learning rates (default 1e-4 2e-4 4e-4)");
  c_sweep->add_option("--modes", modes, "quant modes (default all four)");

  auto* c_export = app.add_subcommand("export", "pack ternary weights for deployment");
  add_common(c_export);
  c_export->add_option("--checkpoint", ckpt_path)->required();
  c_export->add_flag("--pack-embeddings", pack_embeddings,
                     "also ternary-pack the tied embedding table (lossy)");

  auto* c_bench = app.add_subcommand("bench", "latency/throughput of a packed model");
  add_common(c_bench);
  c_bench->add_option("--deploy", deploy_path, "packed model file")->required();
  c_bench->add_option("--vocab", vocab_path, "vocab for a realistic prompt");
  c_bench->add_option("--repeats", repeats);
  c_bench->add_option("--warmup", warmup);

  auto* c_report = app.add_subcommand("report", "merge run outputs into one summary");
  c_report->add_option("--in-dir", in_dir, "directory holding run outputs")->required();
  c_report->add_option("--out-dir", out_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out = resolve_out_dir(out_dir);
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::from_file(config_path);
    if (seed_override) {
      cfg.seed = *seed_override;
      cfg.train.seed = *seed_override;
      cfg.sampling.seed = *seed_override;
    }
    if (scene_override) cfg.held_out = *scene_override;

    if (app.got_subcommand(c_tok)) return run_tokenizer_train(cfg, out);
    if (app.got_subcommand(c_train)) return run_train(cfg, out, vocab_path);
    if (app.got_subcommand(c_eval)) return run_eval(cfg, out, vocab_path, ckpt_path, baseline_path);
    if (app.got_subcommand(c_sweep)) return run_sweep(cfg, out, vocab_path, lrs, modes);
    if (app.got_subcommand(c_export)) return run_export(cfg, out, ckpt_path, pack_embeddings);
    if (app.got_subcommand(c_bench))
      return run_bench(cfg, out, deploy_path, vocab_path, repeats, warmup);
    if (app.got_subcommand(c_report)) return run_report(in_dir, out);
    return kExitError;
  } catch (const ConfigError& e) {
    std::cerr << "bitseq: error code=" << kExitConfig << " kind=config msg=\"" << e.what()
              << "\"\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "bitseq: error code=" << kExitIo << " kind=io msg=\"" << e.what() << "\"\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "bitseq: error code=" << kExitFormat << " kind=format msg=\"" << e.what()
              << "\"\n";
    return kExitFormat;
  } catch (const std::exception& e) {
    std::cerr << "bitseq: error code=" << kExitError << " kind=runtime msg=\"" << e.what()
              << "\"\n";
    return kExitError;
  }
}
