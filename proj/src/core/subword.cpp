#include "memrw/subword.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "memrw/error.hpp"

namespace memrw::subword {
namespace {

using Symbols = std::vector<std::string>;

Symbols initial_symbols(std::string_view word) {
  Symbols s;
  s.reserve(word.size());
  for (char ch : word) s.emplace_back(1, ch);
  s.back() += kEndOfWord;
  return s;
}

std::string pair_key(const std::string& l, const std::string& r) {
  std::string k;
  k.reserve(l.size() + r.size() + 1);
  k += l;
  k += ' ';
  k += r;
  return k;
}

int special_id(std::string_view word) {
  for (int i = 0; i < kNumSpecials; ++i) {
    if (kSpecialWords[i] == word) return i;
  }
  return -1;
}

}  // namespace

SubwordVocab::SubwordVocab(std::vector<MergeRule> merges,
                           std::vector<std::string> subwords)
    : merges_(std::move(merges)) {
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const MergeRule& m = merges_[r];
    if (m.left.empty() || m.right.empty() || m.rank != static_cast<int>(r)) {
      throw Error(ErrorCode::kFormat, "merge ranks must be contiguous from 0");
    }
    merge_rank_.emplace(pair_key(m.left, m.right), m.rank);
  }
  for (std::string_view s : kSpecialWords) symbols_.emplace_back(s);
  for (auto& s : subwords) symbols_.push_back(std::move(s));
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!ids_.emplace(symbols_[i], static_cast<int>(i)).second) {
      throw Error(ErrorCode::kFormat, "duplicate subword '" + symbols_[i] + "'");
    }
  }
}

SubwordVocab::SubwordVocab(const SubwordVocab& other)
    : merges_(other.merges_),
      symbols_(other.symbols_),
      ids_(other.ids_),
      merge_rank_(other.merge_rank_) {}

SubwordVocab& SubwordVocab::operator=(const SubwordVocab& other) {
  if (this != &other) {
    merges_ = other.merges_;
    symbols_ = other.symbols_;
    ids_ = other.ids_;
    merge_rank_ = other.merge_rank_;
    std::lock_guard lock(cache_mutex_);
    cache_.clear();
  }
  return *this;
}

int SubwordVocab::id(std::string_view symbol) const {
  auto it = ids_.find(std::string(symbol));
  return it == ids_.end() ? -1 : it->second;
}

std::vector<std::string> SubwordVocab::segment(std::string_view word) const {
  Symbols s = initial_symbols(word);
  // Repeatedly apply the lowest-ranked merge present; this is the same as
  // applying every merge in rank order.
  while (s.size() > 1) {
    int best = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      auto it = merge_rank_.find(pair_key(s[i], s[i + 1]));
      if (it != merge_rank_.end()) best = std::min(best, it->second);
    }
    if (best == std::numeric_limits<int>::max()) break;
    const MergeRule& m = merges_[static_cast<std::size_t>(best)];
    Symbols next;
    next.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i + 1 < s.size() && s[i] == m.left && s[i + 1] == m.right) {
        next.push_back(s[i] + s[i + 1]);
        ++i;
      } else {
        next.push_back(s[i]);
      }
    }
    s = std::move(next);
  }
  return s;
}

std::vector<int> SubwordVocab::encode_word(std::string_view word) const {
  if (word.empty()) throw std::invalid_argument("encode_word: empty word");
  if (int sp = special_id(word); sp >= 0) return {sp};
  {
    std::lock_guard lock(cache_mutex_);
    auto it = cache_.find(std::string(word));
    if (it != cache_.end()) return it->second;
  }
  std::vector<int> ids;
  for (const std::string& piece : segment(word)) {
    auto it = ids_.find(piece);
    if (it != ids_.end()) {
      ids.push_back(it->second);
      continue;
    }
    // Unknown piece: one UNK per character it covers.
    std::string_view p = piece;
    if (p.ends_with(kEndOfWord)) p.remove_suffix(kEndOfWord.size());
    ids.insert(ids.end(), std::max<std::size_t>(p.size(), 1), kUnk);
  }
  std::lock_guard lock(cache_mutex_);
  cache_.emplace(std::string(word), ids);
  return ids;
}

std::string SubwordVocab::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    std::string_view s = symbol(id);
    if (s.ends_with(kEndOfWord)) s.remove_suffix(kEndOfWord.size());
    out += s;
  }
  return out;
}

void SubwordVocab::save_merges(std::ostream& out) const {
  for (const MergeRule& m : merges_) out << m.left << ' ' << m.right << '\n';
}

std::vector<MergeRule> load_merges(std::istream& in) {
  std::vector<MergeRule> merges;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    MergeRule m;
    std::string extra;
    if (!(ls >> m.left >> m.right) || (ls >> extra)) {
      throw Error(ErrorCode::kFormat, "malformed merge line: " + line);
    }
    m.rank = static_cast<int>(merges.size());
    merges.push_back(std::move(m));
  }
  return merges;
}

SubwordVocab learn_bpe(const std::vector<std::vector<std::string>>& corpus,
                       int num_merges) {
  if (num_merges < 0) throw Error(ErrorCode::kInvalidArgument, "num_merges must be >= 0");
  std::map<std::string, long> word_counts;
  for (const auto& seq : corpus) {
    for (const auto& w : seq) {
      if (!w.empty() && special_id(w) < 0) ++word_counts[w];
    }
  }
  if (word_counts.empty()) throw Error(ErrorCode::kInvalidArgument, "empty corpus");

  std::vector<Symbols> words;
  std::vector<long> counts;
  std::set<std::string> alphabet;
  for (const auto& [w, c] : word_counts) {
    words.push_back(initial_symbols(w));
    counts.push_back(c);
    for (char ch : w) {
      alphabet.insert(std::string(1, ch));
      alphabet.insert(std::string(1, ch) + std::string(kEndOfWord));
    }
  }

  std::vector<MergeRule> merges;
  std::vector<std::string> learned(alphabet.begin(), alphabet.end());
  std::set<std::string> known(alphabet.begin(), alphabet.end());
  for (int r = 0; r < num_merges; ++r) {
    std::map<std::pair<std::string, std::string>, long> pairs;
    for (std::size_t i = 0; i < words.size(); ++i) {
      const Symbols& s = words[i];
      for (std::size_t k = 0; k + 1 < s.size(); ++k) pairs[{s[k], s[k + 1]}] += counts[i];
    }
    if (pairs.empty()) break;
    // std::map iterates in (left, right) order, so the first maximum is the
    // lexicographically smallest among ties.
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    merges.push_back(MergeRule{left, right, r});
    const std::string joined = left + right;
    if (known.insert(joined).second) learned.push_back(joined);
    for (Symbols& s : words) {
      Symbols next;
      next.reserve(s.size());
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (k + 1 < s.size() && s[k] == left && s[k + 1] == right) {
          next.push_back(joined);
          ++k;
        } else {
          next.push_back(s[k]);
        }
      }
      s = std::move(next);
    }
  }
  return SubwordVocab(std::move(merges), std::move(learned));
}

EmbeddingTable EmbeddingTable::create(nn::ParamStore& store, const std::string& name,
                                      nn::Index dim, int vocab_size) {
  return EmbeddingTable{store.add(name, dim, vocab_size), dim, vocab_size};
}

nn::Expr EmbeddingTable::word_embedding(nn::Graph& g, std::span<const int> ids) const {
  for (int id : ids) {
    if (id < 0 || id >= vocab_size) {
      throw Error(ErrorCode::kInvalidArgument, "embedding id out of range");
    }
  }
  return g.lookup_sum(table, ids);
}

}  // namespace memrw::subword
