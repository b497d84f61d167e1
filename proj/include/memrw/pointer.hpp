#pragma once

// Memory-grounded pointer network. A decoder LSTM copies words from the ASR
// n-best and from the user's memory through two-level (word, utterance)
// attention, mixes the two copy distributions with a learned gate, and
// predicts at every step whether the query should be rewritten at all.

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "memrw/corpus.hpp"
#include "memrw/nn/layers.hpp"
#include "memrw/subword.hpp"
#include "memrw/text.hpp"
#include "memrw/training.hpp"

namespace memrw::pointer {

struct PointerConfig {
  int embedding_dim = 100;
  int hidden_dim = 100;
  int attention_dim = 100;
  nn::AttentionKind attention_kind = nn::AttentionKind::kAdditive;
  bool no_memory = false;
  bool generation_vocab = false;
  int nbest_size = 5;
  int max_len = 20;
  double lambda = 0.5;

  void validate() const;
  friend bool operator==(const PointerConfig&, const PointerConfig&) = default;
};

inline const std::string kEosWord{subword::kSpecialWords[subword::kEos]};
inline const std::string kBosWord{subword::kSpecialWords[subword::kBos]};

// One encoded source (the n-best or the memory). Positions of all its
// utterances are laid side by side.
struct EncodedSource {
  nn::Expr keys;                  // 2H x N encoder outputs
  nn::Expr word_keys;             // word-level projection of keys
  nn::Expr utt_keys;              // utterance-level projection of keys
  std::vector<nn::Index> offsets;  // utterance u spans [offsets[u], offsets[u+1])
  std::vector<int> word_ids;      // surface word of each position, in Sources::words
};

struct Sources {
  EncodedSource nbest;
  std::optional<EncodedSource> memory;
  // Output support: every surface word of the sources, then the generation
  // vocabulary when enabled. EOS is always present.
  std::vector<std::string> words;
  std::unordered_map<std::string, int> word_index;
  std::vector<int> generation_ids;
  nn::Expr init_h;
  nn::Expr init_c;
};

struct HierarchicalOutput {
  nn::Expr utt_weights;   // U x 1
  nn::Expr word_weights;  // N x 1, sums to one within each utterance
  nn::Expr context;       // 2H x 1
  nn::Expr copy;          // |words| x 1
};

struct StepOutput {
  nn::Expr word_dist;  // |words| x 1
  nn::Expr rewritable;  // 1 x 1
  nn::Expr gates;       // 1, 2 or 3 entries: n-best, memory, generation
  nn::Expr nbest_context;
  nn::Expr memory_context;
  nn::LstmState state;
};

struct DecodeResult {
  corpus::Tokens words;  // without EOS
  std::vector<double> word_probs;
  std::vector<double> rw_probs;
};

// sqrt(geomean(word_probs) * geomean(rw_probs)) in log space. Any zero
// entry gives 0. Throws on an empty array.
double rewrite_probability(std::span<const double> word_probs, std::span<const double> rw_probs);

class PointerModel {
 public:
  PointerModel(subword::SubwordVocab vocab, PointerConfig config,
               std::vector<std::string> generation_words = {});

  void initialize(std::uint64_t seed);

  const PointerConfig& config() const { return config_; }
  const subword::SubwordVocab& vocab() const { return vocab_; }
  const std::vector<std::string>& generation_words() const { return generation_words_; }
  const nn::ParamStore& params() const { return params_; }
  nn::ParamStore& params() { return params_; }
  const subword::EmbeddingTable& embedding() const { return embedding_; }
  const nn::BiLstm& memory_encoder() const { return memory_encoder_; }
  const nn::Attention& memory_word_attention() const { return memory_word_att_; }
  const nn::Attention& memory_utt_attention() const { return memory_utt_att_; }
  const nn::Dense& gate() const { return gate_; }
  const nn::Dense& rewritable_head() const { return rewritable_; }

  // Memory encoder input for one entry: word embeddings with log(1 + freq)
  // appended as an extra row, (E + 1) x T.
  nn::Expr memory_inputs(nn::Graph& g, const corpus::MemoryEntry& entry) const;

  // Memory is ignored in no-memory mode or when it has no entries.
  Sources encode_sources(nn::Graph& g, const corpus::NBest& nbest,
                         const corpus::UserMemory* memory) const;
  HierarchicalOutput attend_nbest(nn::Graph& g, nn::Expr query, const Sources& s) const;
  HierarchicalOutput attend_memory(nn::Graph& g, nn::Expr query, const Sources& s) const;
  StepOutput decode_step(nn::Graph& g, const Sources& s, nn::LstmState state,
                         const std::string& prev_word) const;
  nn::LstmState initial_state(const Sources& s) const { return {s.init_h, s.init_c}; }

  DecodeResult greedy_decode(const corpus::NBest& nbest, const corpus::UserMemory* memory) const;
  RewriteDecision rewrite(const corpus::NBest& nbest, const corpus::UserMemory* memory,
                          double threshold) const;

  // (1 - lambda) * mask * sum CE / T + lambda * sum BCE / T with teacher
  // forcing over the rephrase followed by EOS. Built on `g`.
  nn::Expr loss(nn::Graph& g, const corpus::RephrasePair& pair,
                const corpus::UserMemory* memory) const;
  UnitLoss pair_loss(const nn::ParamStore& params, const corpus::RephrasePair& pair,
                     const corpus::UserMemory* memory, nn::Gradients* grads) const;

 private:
  EncodedSource encode_source(nn::Graph& g, const std::vector<corpus::Tokens>& utts,
                              const std::vector<int>* frequencies, const nn::BiLstm& encoder,
                              const nn::Attention& word_att, const nn::Attention& utt_att,
                              Sources& s) const;
  HierarchicalOutput attend(nn::Graph& g, nn::Expr query, const EncodedSource& src,
                            const nn::Attention& word_att, const nn::Attention& utt_att,
                            std::size_t n_words) const;
  int word_id(Sources& s, const std::string& w) const;

  subword::SubwordVocab vocab_;
  PointerConfig config_;
  std::vector<std::string> generation_words_;
  nn::ParamStore params_;
  subword::EmbeddingTable embedding_;
  nn::BiLstm nbest_encoder_;
  nn::BiLstm memory_encoder_;
  nn::Dense init_;
  nn::Lstm decoder_;
  nn::Attention nbest_word_att_;
  nn::Attention nbest_utt_att_;
  nn::Attention memory_word_att_;
  nn::Attention memory_utt_att_;
  nn::Dense gate_;
  nn::Dense rewritable_;
  nn::Dense generator_;
};

struct PointerTrainConfig {
  TrainOptions options{.epochs = 10, .batch_size = 256, .threads = 1, .seed = 0};
};

// Words of the training rephrases plus EOS, sorted.
std::vector<std::string> generation_vocabulary(const corpus::DatasetSplit& split);

LossTrace train_pointer(PointerModel& model, nn::Adam& adam, const corpus::DatasetSplit& split,
                        const PointerTrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace memrw::pointer
