#pragma once

// Pieces shared by the two rewriting models.

#include <optional>

#include "memrw/corpus.hpp"
#include "memrw/nn/graph.hpp"
#include "memrw/subword.hpp"

namespace memrw {

// Model output for one query. `candidate` is the best rewrite regardless of
// the threshold; `rewrite` says whether it clears the threshold.
struct RewriteDecision {
  bool rewrite = false;
  std::optional<corpus::Tokens> candidate;
  double probability = 0.0;
};

// Word embeddings of `tokens` as columns, E x T.
nn::Expr embed_tokens(nn::Graph& g, const subword::EmbeddingTable& table,
                      const subword::SubwordVocab& vocab, const corpus::Tokens& tokens);

// Words of the training side of a split, one sequence per utterance.
std::vector<corpus::Tokens> training_corpus(const corpus::DatasetSplit& split);

}  // namespace memrw
