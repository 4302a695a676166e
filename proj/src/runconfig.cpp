#include "bitseq/runconfig.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "bitseq/errors.hpp"

namespace bitseq {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

template <typename T>
T parse_num(const std::string& v, const std::string& key) {
  std::istringstream ss(v);
  T out;
  ss >> out;
  if (ss.fail() || !ss.eof()) throw ConfigError("config: bad value for " + key + ": '" + v + "'");
  return out;
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return from_text(buf.str());
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::map<std::string, std::function<void(const std::string&)>> keys;

  keys["model.encoder_blocks"] = [&](const std::string& v) { cfg.model.n_encoder_blocks = parse_num<int>(v, "model.encoder_blocks"); };
  keys["model.decoder_blocks"] = [&](const std::string& v) { cfg.model.n_decoder_blocks = parse_num<int>(v, "model.decoder_blocks"); };
  keys["model.d_model"] = [&](const std::string& v) { cfg.model.d_model = parse_num<int>(v, "model.d_model"); };
  keys["model.d_ff"] = [&](const std::string& v) { cfg.model.d_ff = parse_num<int>(v, "model.d_ff"); };
  keys["model.heads"] = [&](const std::string& v) { cfg.model.n_heads = parse_num<int>(v, "model.heads"); };
  keys["model.max_seq_len"] = [&](const std::string& v) { cfg.model.max_seq_len = parse_num<int>(v, "model.max_seq_len"); };
  keys["model.tie_lm_head"] = [&](const std::string& v) { cfg.model.tie_lm_head = parse_bool(v, "model.tie_lm_head"); };

  keys["quant.mode"] = [&](const std::string& v) {
    auto m = quant_mode_from_string(v);
    if (!m) throw ConfigError("config: bad quant.mode '" + v + "' (none|both|activ|weight)");
    cfg.quant_mode = *m;
  };
  keys["quant.eps"] = [&](const std::string& v) { cfg.quant_eps = parse_num<float>(v, "quant.eps"); };
  keys["quant.bias_policy"] = [&](const std::string& v) {
    if (v == "literal") cfg.bias_policy = BiasPolicy::Literal;
    else if (v == "post_dequant") cfg.bias_policy = BiasPolicy::PostDequant;
    else throw ConfigError("config: bad quant.bias_policy '" + v + "'");
  };
  keys["quant.ste_clipped"] = [&](const std::string& v) { cfg.ste_clipped = parse_bool(v, "quant.ste_clipped"); };

  keys["train.lr"] = [&](const std::string& v) { cfg.train.lr = parse_num<float>(v, "train.lr"); };
  keys["train.epochs"] = [&](const std::string& v) { cfg.train.epochs = parse_num<int>(v, "train.epochs"); };
  keys["train.batch_size"] = [&](const std::string& v) { cfg.train.batch_size = parse_num<int>(v, "train.batch_size"); };
  keys["train.grad_clip_norm"] = [&](const std::string& v) { cfg.train.grad_clip_norm = parse_num<float>(v, "train.grad_clip_norm"); };
  keys["train.weight_decay"] = [&](const std::string& v) { cfg.train.weight_decay = parse_num<float>(v, "train.weight_decay"); };

  keys["sample.temperature"] = [&](const std::string& v) { cfg.sampling.temperature = parse_num<float>(v, "sample.temperature"); };
  keys["sample.max_new_tokens"] = [&](const std::string& v) { cfg.sampling.max_new_tokens = parse_num<int>(v, "sample.max_new_tokens"); };
  keys["sample.k"] = [&](const std::string& v) { cfg.eval_k = parse_num<int>(v, "sample.k"); };
  keys["sample.pool"] = [&](const std::string& v) { cfg.eval_pool = parse_num<int>(v, "sample.pool"); };

  keys["tokenizer.vocab_size"] = [&](const std::string& v) { cfg.tokenizer_vocab_size = parse_num<int>(v, "tokenizer.vocab_size"); };
  keys["tokenizer.precision"] = [&](const std::string& v) { cfg.serialize.precision = parse_num<int>(v, "tokenizer.precision"); };
  keys["tokenizer.max_neighbors"] = [&](const std::string& v) { cfg.serialize.max_neighbors = parse_num<int>(v, "tokenizer.max_neighbors"); };

  keys["data.synth"] = [&](const std::string& v) { cfg.synth_kind = v; };
  keys["data.synth_agents"] = [&](const std::string& v) { cfg.synth_agents = parse_num<int>(v, "data.synth_agents"); };
  keys["data.synth_frames"] = [&](const std::string& v) { cfg.synth_frames = parse_num<int>(v, "data.synth_frames"); };
  keys["data.synth_noise"] = [&](const std::string& v) { cfg.synth_noise = parse_num<float>(v, "data.synth_noise"); };
  keys["data.scenes"] = [&](const std::string& v) { cfg.scene_files = split_commas(v); };
  keys["data.held_out"] = [&](const std::string& v) { cfg.held_out = v; };
  keys["data.obs_len"] = [&](const std::string& v) { cfg.obs_len = parse_num<int>(v, "data.obs_len"); };
  keys["data.fut_len"] = [&](const std::string& v) { cfg.fut_len = parse_num<int>(v, "data.fut_len"); };
  keys["data.stride"] = [&](const std::string& v) { cfg.window_stride = parse_num<int>(v, "data.stride"); };

  keys["export.encoding"] = [&](const std::string& v) {
    if (v != "two_bit" && v != "base243")
      throw ConfigError("config: bad export.encoding '" + v + "' (two_bit|base243)");
    cfg.encoding = v;
  };
  keys["seed"] = [&](const std::string& v) {
    cfg.seed = parse_num<std::uint64_t>(v, "seed");
    cfg.train.seed = cfg.seed;
    cfg.sampling.seed = cfg.seed;
  };

  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value at line " + std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second(value);
  }

  cfg.serialize.fut_len = cfg.fut_len;
  return cfg;
}

std::string RunConfig::resolved() const {
  std::ostringstream os;
  os << "model.encoder_blocks = " << model.n_encoder_blocks << "\n";
  os << "model.decoder_blocks = " << model.n_decoder_blocks << "\n";
  os << "model.d_model = " << model.d_model << "\n";
  os << "model.d_ff = " << model.d_ff << "\n";
  os << "model.heads = " << model.n_heads << "\n";
  os << "model.max_seq_len = " << model.max_seq_len << "\n";
  os << "model.tie_lm_head = " << (model.tie_lm_head ? "true" : "false") << "\n";
  os << "quant.mode = " << to_string(quant_mode) << "\n";
  os << "quant.eps = " << quant_eps << "\n";
  os << "quant.bias_policy = " << (bias_policy == BiasPolicy::Literal ? "literal" : "post_dequant")
     << "\n";
  os << "quant.ste_clipped = " << (ste_clipped ? "true" : "false") << "\n";
  os << "train.lr = " << train.lr << "\n";
  os << "train.epochs = " << train.epochs << "\n";
  os << "train.batch_size = " << train.batch_size << "\n";
  os << "train.grad_clip_norm = " << train.grad_clip_norm << "\n";
  os << "train.weight_decay = " << train.weight_decay << "\n";
  os << "sample.temperature = " << sampling.temperature << "\n";
  os << "sample.max_new_tokens = " << sampling.max_new_tokens << "\n";
  os << "sample.k = " << eval_k << "\n";
  os << "sample.pool = " << eval_pool << "\n";
  os << "tokenizer.vocab_size = " << tokenizer_vocab_size << "\n";
  os << "tokenizer.precision = " << serialize.precision << "\n";
  os << "tokenizer.max_neighbors = " << serialize.max_neighbors << "\n";
  os << "data.synth = " << synth_kind << "\n";
  os << "data.synth_agents = " << synth_agents << "\n";
  os << "data.synth_frames = " << synth_frames << "\n";
  os << "data.synth_noise = " << synth_noise << "\n";
  os << "data.scenes = ";
  for (size_t i = 0; i < scene_files.size(); ++i) os << (i ? "," : "") << scene_files[i];
  os << "\n";
  os << "data.held_out = " << held_out << "\n";
  os << "data.obs_len = " << obs_len << "\n";
  os << "data.fut_len = " << fut_len << "\n";
  os << "data.stride = " << window_stride << "\n";
  os << "export.encoding = " << encoding << "\n";
  os << "seed = " << seed << "\n";
  return os.str();
}

TernaryEncoding RunConfig::ternary_encoding() const {
  return encoding == "base243" ? TernaryEncoding::Base243 : TernaryEncoding::TwoBit;
}

}  // namespace bitseq
