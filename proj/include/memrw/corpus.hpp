#pragma once

// Utterances, ASR n-best lists, user memories and rephrase pairs, plus the
// operations that build datasets from them.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace memrw::corpus {

using Tokens = std::vector<std::string>;
using Slots = std::map<std::string, std::string>;

inline constexpr std::size_t kMaxNBest = 5;

struct Utterance {
  Tokens tokens;
  std::string intent;
  Slots slots;
  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct NBest {
  std::vector<Tokens> hyps;
  std::vector<double> scores;  // non-increasing, one per hypothesis

  // Throws Error(kInvalidArgument) when an invariant is broken.
  void validate() const;
  NBest truncated(std::size_t n) const;
  friend bool operator==(const NBest&, const NBest&) = default;
};

struct MemoryEntry {
  Utterance utterance;
  int frequency = 1;
  friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

struct UserMemory {
  std::string user_id;
  std::vector<MemoryEntry> entries;
  friend bool operator==(const UserMemory&, const UserMemory&) = default;
};

struct RephrasePair {
  std::string user_id;
  NBest first_turn;
  Utterance rephrase;
  bool rewritable = false;
  friend bool operator==(const RephrasePair&, const RephrasePair&) = default;
};

using MemoryMap = std::map<std::string, UserMemory>;

struct DatasetSplit {
  std::vector<RephrasePair> train;
  std::vector<RephrasePair> test;
  MemoryMap memories;
  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

// Equal intent and identical slot maps; surface tokens are ignored.
bool semantic_match(const Utterance& a, const Utterance& b);

// True when some entry of `memory` semantically matches `u`.
bool memory_contains(const UserMemory& memory, const Utterance& u);

// Groups each user's utterances by exact token sequence. Entries are ordered
// by descending frequency, then lexicographically by tokens.
MemoryMap aggregate_memory(
    const std::vector<std::pair<std::string, Utterance>>& successful);

// Seeded user-level partition: round(ratio * users) users go to train, and
// all pairs of a user land on the same side. Users are the union of pair
// owners and memory owners. Every user in the result has a memory entry.
DatasetSplit split_by_user(std::vector<RephrasePair> pairs, MemoryMap memories,
                           double ratio, std::uint64_t seed);

std::string join(const Tokens& tokens);
Tokens split_words(std::string_view text);

}  // namespace memrw::corpus
