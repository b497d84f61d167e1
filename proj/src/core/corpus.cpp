#include "memrw/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "memrw/error.hpp"
#include "memrw/rng.hpp"

namespace memrw::corpus {

void NBest::validate() const {
  if (hyps.empty() || hyps.size() > kMaxNBest) {
    throw Error(ErrorCode::kInvalidArgument, "n-best must hold 1 to 5 hypotheses");
  }
  if (scores.size() != hyps.size()) {
    throw Error(ErrorCode::kInvalidArgument, "n-best needs one score per hypothesis");
  }
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (hyps[i].empty()) {
      throw Error(ErrorCode::kInvalidArgument, "n-best hypothesis is empty");
    }
    if (i > 0 && scores[i] > scores[i - 1]) {
      throw Error(ErrorCode::kInvalidArgument, "n-best scores must be non-increasing");
    }
  }
}

NBest NBest::truncated(std::size_t n) const {
  NBest out = *this;
  if (out.hyps.size() > n) {
    out.hyps.resize(n);
    out.scores.resize(n);
  }
  return out;
}

bool semantic_match(const Utterance& a, const Utterance& b) {
  return a.intent == b.intent && a.slots == b.slots;
}

bool memory_contains(const UserMemory& memory, const Utterance& u) {
  return std::any_of(memory.entries.begin(), memory.entries.end(),
                     [&](const MemoryEntry& e) { return semantic_match(e.utterance, u); });
}

MemoryMap aggregate_memory(
    const std::vector<std::pair<std::string, Utterance>>& successful) {
  std::map<std::string, std::map<Tokens, MemoryEntry>> grouped;
  for (const auto& [user, utt] : successful) {
    auto& slot = grouped[user];
    auto it = slot.find(utt.tokens);
    if (it == slot.end()) {
      slot.emplace(utt.tokens, MemoryEntry{utt, 1});
    } else {
      ++it->second.frequency;
    }
  }
  MemoryMap out;
  for (auto& [user, entries] : grouped) {
    UserMemory m{user, {}};
    for (auto& [tokens, e] : entries) m.entries.push_back(std::move(e));
    std::stable_sort(m.entries.begin(), m.entries.end(),
                     [](const MemoryEntry& a, const MemoryEntry& b) {
                       if (a.frequency != b.frequency) return a.frequency > b.frequency;
                       return a.utterance.tokens < b.utterance.tokens;
                     });
    out.emplace(user, std::move(m));
  }
  return out;
}

DatasetSplit split_by_user(std::vector<RephrasePair> pairs, MemoryMap memories,
                           double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "split ratio must lie in (0, 1)");
  }
  std::set<std::string> user_set;
  for (const auto& p : pairs) user_set.insert(p.user_id);
  for (const auto& [u, m] : memories) user_set.insert(u);
  if (user_set.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "need at least 2 users to split");
  }
  std::vector<std::string> users(user_set.begin(), user_set.end());
  Rng rng = Rng::stream(seed, "split");
  rng.shuffle(users);
  const auto n = static_cast<long>(users.size());
  const long n_train = std::clamp(std::lround(ratio * static_cast<double>(n)), 1L, n - 1);
  const std::set<std::string> train_users(users.begin(), users.begin() + n_train);

  DatasetSplit split;
  for (auto& p : pairs) {
    (train_users.contains(p.user_id) ? split.train : split.test).push_back(std::move(p));
  }
  for (const auto& u : users) {
    auto it = memories.find(u);
    split.memories.emplace(u, it == memories.end() ? UserMemory{u, {}} : std::move(it->second));
  }
  return split;
}

std::string join(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Tokens split_words(std::string_view text) {
  Tokens out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace memrw::corpus
