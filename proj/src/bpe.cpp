#include "bitseq/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "bitseq/errors.hpp"

namespace bitseq {

namespace {

const char* kSpecials[3] = {"<pad>", "</s>", "<unk>"};

// One left-to-right pass replacing every (a, b) with merged. Overlaps resolve
// left-first, e.g. "aaa" under (a,a) becomes [aa, a].
void apply_merge(std::vector<int>& seq, int a, int b, int merged) {
  size_t w = 0;
  for (size_t r = 0; r < seq.size();) {
    if (r + 1 < seq.size() && seq[r] == a && seq[r + 1] == b) {
      seq[w++] = merged;
      r += 2;
    } else {
      seq[w++] = seq[r++];
    }
  }
  seq.resize(w);
}

}  // namespace

BpeVocab train_bpe(const std::vector<std::string>& corpus, int vocab_size) {
  if (corpus.empty()) throw std::invalid_argument("train_bpe: empty corpus");

  BpeVocab v;
  std::set<char> chars;
  for (const auto& text : corpus)
    for (char c : text) chars.insert(c);
  v.alphabet.assign(chars.begin(), chars.end());

  for (const auto* s : kSpecials) v.tokens.emplace_back(s);
  for (char c : v.alphabet) v.tokens.emplace_back(1, c);
  const int base = v.size();
  if (vocab_size < base)
    throw std::invalid_argument("train_bpe: vocab_size " + std::to_string(vocab_size) +
                                " below base alphabet of " + std::to_string(base));

  std::unordered_map<char, int> char_id;
  for (size_t i = 0; i < v.alphabet.size(); ++i)
    char_id[v.alphabet[i]] = 3 + static_cast<int>(i);

  std::vector<std::vector<int>> seqs;
  seqs.reserve(corpus.size());
  for (const auto& text : corpus) {
    std::vector<int> s;
    s.reserve(text.size());
    for (char c : text) s.push_back(char_id.at(c));
    seqs.push_back(std::move(s));
  }

  while (v.size() < vocab_size) {
    // Ordered map so the lexicographically-smallest pair wins frequency ties.
    std::map<std::pair<std::string, std::string>, std::pair<int, std::pair<int, int>>> freq;
    for (const auto& s : seqs)
      for (size_t i = 0; i + 1 < s.size(); ++i) {
        auto key = std::make_pair(v.tokens[static_cast<size_t>(s[i])],
                                  v.tokens[static_cast<size_t>(s[i + 1])]);
        auto& slot = freq[key];
        slot.first += 1;
        slot.second = {s[i], s[i + 1]};
      }
    int best_count = 0;
    std::pair<int, int> best_ids{-1, -1};
    std::string best_str;
    for (const auto& [key, val] : freq) {
      if (val.first > best_count) {
        best_count = val.first;
        best_ids = val.second;
        best_str = key.first + key.second;
      }
    }
    if (best_count < 2) break;  // no pair repeats

    const int merged = v.size();
    v.tokens.push_back(best_str);
    v.merges.push_back(best_ids);
    for (auto& s : seqs) apply_merge(s, best_ids.first, best_ids.second, merged);
  }

  for (size_t i = 0; i < v.tokens.size(); ++i) v.token_to_id[v.tokens[i]] = static_cast<int>(i);
  return v;
}

std::vector<int> bpe_encode(const BpeVocab& vocab, const std::string& text) {
  std::unordered_map<char, int> char_id;
  for (size_t i = 0; i < vocab.alphabet.size(); ++i)
    char_id[vocab.alphabet[i]] = 3 + static_cast<int>(i);

  std::vector<int> seq;
  seq.reserve(text.size());
  for (char c : text) {
    auto it = char_id.find(c);
    seq.push_back(it == char_id.end() ? BpeVocab::kUnkId : it->second);
  }
  for (size_t r = 0; r < vocab.merges.size(); ++r)
    apply_merge(seq, vocab.merges[r].first, vocab.merges[r].second,
                vocab.merged_id(static_cast<int>(r)));
  return seq;
}

std::string bpe_decode(const BpeVocab& vocab, const std::vector<int>& ids) {
  std::string out;
  for (int id : ids) {
    if (id == BpeVocab::kPadId || id == BpeVocab::kEosId) continue;
    if (id < 0 || id >= vocab.size())
      throw std::out_of_range("bpe_decode: id " + std::to_string(id) + " outside vocab");
    out += vocab.tokens[static_cast<size_t>(id)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocab file
// ---------------------------------------------------------------------------

namespace {

std::string to_hex(const std::string& s) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(s.size() * 2);
  for (unsigned char c : s) {
    out += digits[c >> 4];
    out += digits[c & 0xF];
  }
  return out;
}

std::string from_hex(const std::string& s, int line_no) {
  if (s.size() % 2 != 0)
    throw FormatError("vocab file: odd hex length at line " + std::to_string(line_no));
  auto nib = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw FormatError("vocab file: bad hex digit at line " + std::to_string(line_no));
  };
  std::string out;
  out.reserve(s.size() / 2);
  for (size_t i = 0; i < s.size(); i += 2)
    out += static_cast<char>((nib(s[i]) << 4) | nib(s[i + 1]));
  return out;
}

}  // namespace

void save_vocab(const BpeVocab& vocab, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open vocab file for writing: " + path);
  os << "bitseq-bpe v1\n";
  os << "pad " << BpeVocab::kPadId << " eos " << BpeVocab::kEosId << " unk " << BpeVocab::kUnkId
     << "\n";
  os << "alphabet " << to_hex(vocab.alphabet) << "\n";
  os << "merges " << vocab.merges.size() << "\n";
  for (const auto& [a, b] : vocab.merges)
    os << to_hex(vocab.tokens[static_cast<size_t>(a)]) << " "
       << to_hex(vocab.tokens[static_cast<size_t>(b)]) << "\n";
  if (!os) throw IoError("write failed for vocab file: " + path);
}

BpeVocab load_vocab(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open vocab file: " + path);
  std::string line;
  int line_no = 1;
  if (!std::getline(is, line) || line != "bitseq-bpe v1")
    throw FormatError("vocab file: bad header at line 1");
  ++line_no;
  if (!std::getline(is, line))
    throw FormatError("vocab file: missing special-id line");
  {
    std::istringstream ss(line);
    std::string kp, ke, ku;
    int vp = -1, ve = -1, vu = -1;
    ss >> kp >> vp >> ke >> ve >> ku >> vu;
    if (kp != "pad" || ke != "eos" || ku != "unk" || vp != 0 || ve != 1 || vu != 2)
      throw FormatError("vocab file: unexpected special ids at line 2");
  }
  ++line_no;
  if (!std::getline(is, line) || line.rfind("alphabet ", 0) != 0)
    throw FormatError("vocab file: missing alphabet at line 3");
  BpeVocab v;
  v.alphabet = from_hex(line.substr(9), line_no);
  for (const auto* s : kSpecials) v.tokens.emplace_back(s);
  for (char c : v.alphabet) v.tokens.emplace_back(1, c);

  ++line_no;
  if (!std::getline(is, line) || line.rfind("merges ", 0) != 0)
    throw FormatError("vocab file: missing merge count at line 4");
  const int n_merges = std::stoi(line.substr(7));
  std::unordered_map<std::string, int> ids;
  for (size_t i = 0; i < v.tokens.size(); ++i) ids[v.tokens[i]] = static_cast<int>(i);
  for (int r = 0; r < n_merges; ++r) {
    ++line_no;
    if (!std::getline(is, line))
      throw FormatError("vocab file: truncated at merge " + std::to_string(r));
    const auto sp = line.find(' ');
    if (sp == std::string::npos)
      throw FormatError("vocab file: malformed merge at line " + std::to_string(line_no));
    const std::string left = from_hex(line.substr(0, sp), line_no);
    const std::string right = from_hex(line.substr(sp + 1), line_no);
    auto li = ids.find(left), ri = ids.find(right);
    if (li == ids.end() || ri == ids.end())
      throw FormatError("vocab file: merge references unknown token at line " +
                        std::to_string(line_no));
    v.merges.emplace_back(li->second, ri->second);
    v.tokens.push_back(left + right);
    ids[v.tokens.back()] = v.size() - 1;
  }
  for (size_t i = 0; i < v.tokens.size(); ++i) v.token_to_id[v.tokens[i]] = static_cast<int>(i);
  return v;
}

}  // namespace bitseq
