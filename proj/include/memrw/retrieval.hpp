#pragma once

// Retrieval rewriter: every memory entry of the user is scored against the
// ASR n-best and the best one is the rewrite.

#include <string>
#include <vector>

#include "memrw/corpus.hpp"
#include "memrw/nn/layers.hpp"
#include "memrw/subword.hpp"
#include "memrw/text.hpp"
#include "memrw/training.hpp"

namespace memrw::retrieval {

enum class EncoderKind { kMeanEmbedding, kBilstmMean, kBilstmSelfAttention };

EncoderKind parse_encoder_kind(const std::string& s);
std::string to_string(EncoderKind kind);

struct RetrievalConfig {
  EncoderKind encoder_kind = EncoderKind::kBilstmMean;
  nn::AttentionKind attention_kind = nn::AttentionKind::kAdditive;
  int embedding_dim = 100;
  int hidden_dim = 100;
  int attention_dim = 100;
  int dense_dim = 100;
  int nbest_size = 5;

  void validate() const;
  friend bool operator==(const RetrievalConfig&, const RetrievalConfig&) = default;
};

struct ScoredMemory {
  corpus::MemoryEntry entry;
  double score = 0.0;
};

// Encoder outputs over the flattened n-best and their attention projection.
struct EncodedNBest {
  nn::Expr keys;
  nn::Expr projected;
};

class RetrievalModel {
 public:
  RetrievalModel(subword::SubwordVocab vocab, RetrievalConfig config);

  // Uniform(-0.08, 0.08) weights, zero biases, forget bias 1.
  void initialize(std::uint64_t seed);

  const RetrievalConfig& config() const { return config_; }
  const subword::SubwordVocab& vocab() const { return vocab_; }
  const nn::ParamStore& params() const { return params_; }
  nn::ParamStore& params() { return params_; }
  const subword::EmbeddingTable& embedding() const { return embedding_; }
  const nn::BiLstm& nbest_encoder() const { return nbest_encoder_; }
  const nn::BiLstm& memory_encoder() const { return memory_encoder_; }
  const nn::Attention& attention() const { return attention_; }
  const nn::Dense& hidden_layer() const { return hidden_; }
  const nn::Dense& output_layer() const { return out_; }

  nn::Index memory_dim() const;

  // Hypotheses (cut to nbest_size) joined by SEP and bi-LSTM encoded, 2H x N.
  EncodedNBest encode_nbest(nn::Graph& g, const corpus::NBest& nbest) const;
  // Fixed-size memory vector, memory_dim() x 1.
  nn::Expr encode_memory(nn::Graph& g, const corpus::Tokens& tokens) const;
  // Probability that the memory matches, 1 x 1.
  nn::Expr score(nn::Graph& g, const EncodedNBest& nbest, nn::Expr memory) const;

  double score_memory(const corpus::NBest& nbest, const corpus::MemoryEntry& entry) const;
  std::vector<double> score_entries(const corpus::NBest& nbest,
                                    const corpus::UserMemory& memory) const;
  std::vector<ScoredMemory> rank(const corpus::NBest& nbest,
                                 const corpus::UserMemory& memory) const;
  RewriteDecision retrieve(const corpus::NBest& nbest, const corpus::UserMemory& memory,
                           double threshold) const;

  // Weighted BCE summed over the user's entries for one pair: positives
  // weigh 1 and negatives `negative_weight`. Weight is the sum of weights.
  UnitLoss pair_loss(const nn::ParamStore& params, const corpus::RephrasePair& pair,
                     const corpus::UserMemory& memory, double negative_weight,
                     nn::Gradients* grads) const;

 private:
  subword::SubwordVocab vocab_;
  RetrievalConfig config_;
  nn::ParamStore params_;
  subword::EmbeddingTable embedding_;
  nn::BiLstm nbest_encoder_;
  nn::BiLstm memory_encoder_;
  nn::Dense self_attention_;
  nn::ParamId self_attention_v_;
  nn::Attention attention_;
  nn::Dense hidden_;
  nn::Dense out_;
};

struct RetrievalTrainConfig {
  TrainOptions options{.epochs = 10, .batch_size = 512, .threads = 1, .seed = 0};
  // Negatives are down-weighted to this many per positive.
  double negatives_per_positive = 4.0;
};

// Negative weight min(1, ratio * positives / negatives) over the train split.
double negative_weight(const corpus::DatasetSplit& split, double negatives_per_positive);

LossTrace train_retrieval(RetrievalModel& model, nn::Adam& adam,
                          const corpus::DatasetSplit& split,
                          const RetrievalTrainConfig& config,
                          const EpochCallback& on_epoch = {});

}  // namespace memrw::retrieval
