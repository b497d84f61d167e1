#pragma once

// Byte-pair-encoding subword vocabulary and summed-subword word embeddings.

#include <cstdint>
#include <istream>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "memrw/nn/graph.hpp"

namespace memrw::subword {

inline constexpr std::string_view kEndOfWord = "</w>";

// Reserved ids. Each special is also a literal word that encodes to itself.
enum SpecialId : int { kPad = 0, kUnk = 1, kBos = 2, kEos = 3, kSep = 4 };
inline constexpr int kNumSpecials = 5;
inline constexpr std::string_view kSpecialWords[kNumSpecials] = {
    "<pad>", "<unk>", "<s>", "</s>", "<sep>"};

struct MergeRule {
  std::string left;
  std::string right;
  int rank = 0;
  friend bool operator==(const MergeRule&, const MergeRule&) = default;
};

class SubwordVocab {
 public:
  SubwordVocab() = default;
  // `subwords` lists the learned (non-special) symbols in id order.
  SubwordVocab(std::vector<MergeRule> merges, std::vector<std::string> subwords);
  SubwordVocab(const SubwordVocab& other);
  SubwordVocab& operator=(const SubwordVocab& other);

  const std::vector<MergeRule>& merges() const { return merges_; }
  // All symbols in id order, specials first.
  const std::vector<std::string>& symbols() const { return symbols_; }
  int size() const { return static_cast<int>(symbols_.size()); }
  int id(std::string_view symbol) const;  // -1 when absent
  const std::string& symbol(int id) const { return symbols_.at(static_cast<std::size_t>(id)); }

  // Segments one word. Throws std::invalid_argument on an empty word.
  std::vector<int> encode_word(std::string_view word) const;
  // Joins pieces and strips the end-of-word marker.
  std::string decode(std::span<const int> ids) const;

  void save_merges(std::ostream& out) const;

 private:
  std::vector<std::string> segment(std::string_view word) const;

  std::vector<MergeRule> merges_;
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> ids_;
  std::unordered_map<std::string, int> merge_rank_;  // "left right" -> rank
  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<std::string, std::vector<int>> cache_;
};

// Learns merges over the words of `corpus` (each element is a token
// sequence). Among equally frequent pairs the lexicographically smallest
// (left, then right) wins. Throws Error(kInvalidArgument) on an empty corpus.
SubwordVocab learn_bpe(const std::vector<std::vector<std::string>>& corpus,
                       int num_merges);

// Reads "left right" lines; rank is the line number.
std::vector<MergeRule> load_merges(std::istream& in);

// Embedding rows live as columns of a dim x vocab parameter.
struct EmbeddingTable {
  nn::ParamId table;
  nn::Index dim = 0;
  int vocab_size = 0;

  static EmbeddingTable create(nn::ParamStore& store, const std::string& name,
                               nn::Index dim, int vocab_size);
  // Element-wise sum of the rows for `ids`.
  nn::Expr word_embedding(nn::Graph& g, std::span<const int> ids) const;
};

}  // namespace memrw::subword
