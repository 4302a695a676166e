#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace bitseq {

/// Byte-pair vocabulary over a fixed character alphabet. Ids are dense:
/// specials first (pad 0, eos 1, unk 2), then the sorted base alphabet, then
/// one id per merge in creation order.
struct BpeVocab {
  static constexpr int kPadId = 0;
  static constexpr int kEosId = 1;
  static constexpr int kUnkId = 2;

  std::vector<std::string> tokens;                         // id -> bytes
  std::vector<std::pair<int, int>> merges;                 // ordered (left, right) ids
  std::unordered_map<std::string, int> token_to_id;
  std::string alphabet;                                    // sorted unique chars

  int size() const { return static_cast<int>(tokens.size()); }
  int merged_id(int rule) const { return 3 + static_cast<int>(alphabet.size()) + rule; }
};

/// Greedy highest-frequency pair merging until vocab_size is reached or no
/// adjacent pair occurs twice. Equal frequencies break lexicographically on
/// the pair's byte strings, so training is deterministic.
BpeVocab train_bpe(const std::vector<std::string>& corpus, int vocab_size);

/// Applies the merge rules in training order. Characters outside the
/// alphabet map to unk.
std::vector<int> bpe_encode(const BpeVocab& vocab, const std::string& text);

/// Concatenates token strings; specials contribute nothing except unk, which
/// renders as "<unk>".
std::string bpe_decode(const BpeVocab& vocab, const std::vector<int>& ids);

/// Plain-text vocab file: header with special ids and hex-coded alphabet,
/// then one hex-coded merge per line.
void save_vocab(const BpeVocab& vocab, const std::string& path);
BpeVocab load_vocab(const std::string& path);

}  // namespace bitseq
