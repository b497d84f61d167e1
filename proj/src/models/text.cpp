#include "memrw/text.hpp"

#include <set>

#include "memrw/error.hpp"

namespace memrw {

nn::Expr embed_tokens(nn::Graph& g, const subword::EmbeddingTable& table,
                      const subword::SubwordVocab& vocab, const corpus::Tokens& tokens) {
  if (tokens.empty()) throw Error(ErrorCode::kInvalidArgument, "empty utterance");
  std::vector<nn::Expr> cols;
  cols.reserve(tokens.size());
  for (const auto& w : tokens) {
    const std::vector<int> ids = vocab.encode_word(w);
    cols.push_back(table.word_embedding(g, ids));
  }
  return cols.size() == 1 ? cols[0] : g.hcat(cols);
}

std::vector<corpus::Tokens> training_corpus(const corpus::DatasetSplit& split) {
  std::vector<corpus::Tokens> out;
  std::set<std::string> users;
  for (const auto& p : split.train) {
    for (const auto& h : p.first_turn.hyps) out.push_back(h);
    out.push_back(p.rephrase.tokens);
    users.insert(p.user_id);
  }
  for (const auto& u : users) {
    auto it = split.memories.find(u);
    if (it == split.memories.end()) continue;
    for (const auto& e : it->second.entries) out.push_back(e.utterance.tokens);
  }
  return out;
}

}  // namespace memrw
