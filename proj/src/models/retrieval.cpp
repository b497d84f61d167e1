#include "memrw/retrieval.hpp"

#include <algorithm>
#include <array>

#include "memrw/error.hpp"
#include "memrw/rng.hpp"

namespace memrw::retrieval {

using nn::Expr;
using nn::Graph;

EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "mean-embedding") return EncoderKind::kMeanEmbedding;
  if (s == "bilstm-mean") return EncoderKind::kBilstmMean;
  if (s == "bilstm-self-attention") return EncoderKind::kBilstmSelfAttention;
  throw Error(ErrorCode::kConfig, "config error: unknown encoder_kind '" + s + "'");
}

std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kMeanEmbedding:
      return "mean-embedding";
    case EncoderKind::kBilstmMean:
      return "bilstm-mean";
    case EncoderKind::kBilstmSelfAttention:
      return "bilstm-self-attention";
  }
  return "bilstm-mean";
}

void RetrievalConfig::validate() const {
  if (embedding_dim < 1 || hidden_dim < 1 || attention_dim < 1 || dense_dim < 1) {
    throw Error(ErrorCode::kConfig, "config error: dimensions must be positive");
  }
  if (nbest_size < 1 || nbest_size > static_cast<int>(corpus::kMaxNBest)) {
    throw Error(ErrorCode::kConfig, "config error: nbest_size must be in [1, 5]");
  }
}

RetrievalModel::RetrievalModel(subword::SubwordVocab vocab, RetrievalConfig config)
    : vocab_(std::move(vocab)), config_(config) {
  config_.validate();
  const nn::Index e = config_.embedding_dim;
  const nn::Index h = config_.hidden_dim;
  embedding_ = subword::EmbeddingTable::create(params_, "emb", e, vocab_.size());
  nbest_encoder_ = nn::BiLstm::create(params_, "nbest_enc", e, h);
  if (config_.encoder_kind != EncoderKind::kMeanEmbedding) {
    memory_encoder_ = nn::BiLstm::create(params_, "mem_enc", e, h);
  }
  if (config_.encoder_kind == EncoderKind::kBilstmSelfAttention) {
    self_attention_ = nn::Dense::create(params_, "mem_selfattn", 2 * h, config_.attention_dim);
    self_attention_v_ = params_.add("mem_selfattn.v", 1, config_.attention_dim);
  }
  attention_ = nn::Attention::create(params_, "attn", config_.attention_kind, memory_dim(), 2 * h,
                                     config_.attention_dim);
  hidden_ = nn::Dense::create(params_, "hidden", memory_dim() + 2 * h, config_.dense_dim);
  out_ = nn::Dense::create(params_, "out", config_.dense_dim, 1);
}

void RetrievalModel::initialize(std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "init");
  params_.init_uniform(rng);
  nbest_encoder_.set_forget_bias(params_, 1.0);
  if (config_.encoder_kind != EncoderKind::kMeanEmbedding) {
    memory_encoder_.set_forget_bias(params_, 1.0);
  }
}

nn::Index RetrievalModel::memory_dim() const {
  return config_.encoder_kind == EncoderKind::kMeanEmbedding ? config_.embedding_dim
                                                             : 2 * config_.hidden_dim;
}

EncodedNBest RetrievalModel::encode_nbest(Graph& g, const corpus::NBest& nbest) const {
  nbest.validate();
  const std::size_t n = std::min<std::size_t>(nbest.hyps.size(), config_.nbest_size);
  corpus::Tokens flat;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) flat.emplace_back(subword::kSpecialWords[subword::kSep]);
    flat.insert(flat.end(), nbest.hyps[i].begin(), nbest.hyps[i].end());
  }
  EncodedNBest out;
  out.keys = nbest_encoder_.encode(g, embed_tokens(g, embedding_, vocab_, flat));
  out.projected = attention_.project_keys(g, out.keys);
  return out;
}

Expr RetrievalModel::encode_memory(Graph& g, const corpus::Tokens& tokens) const {
  const Expr emb = embed_tokens(g, embedding_, vocab_, tokens);
  if (config_.encoder_kind == EncoderKind::kMeanEmbedding) return g.mean_cols(emb);
  const Expr states = memory_encoder_.encode(g, emb);
  if (config_.encoder_kind == EncoderKind::kBilstmMean) return g.mean_cols(states);
  const Expr proj = self_attention_.apply(g, states, nn::Activation::kTanh);
  const Expr weights = g.softmax(g.matmul(g.param(self_attention_v_), proj));
  return g.matmul(states, weights);
}

Expr RetrievalModel::score(Graph& g, const EncodedNBest& nbest, Expr memory) const {
  const Expr weights = g.softmax(attention_.scores(g, memory, nbest.projected));
  const std::array<Expr, 2> parts{memory, g.matmul(nbest.keys, weights)};
  const Expr hid = hidden_.apply(g, g.vcat(parts), nn::Activation::kTanh);
  return out_.apply(g, hid, nn::Activation::kSigmoid);
}

double RetrievalModel::score_memory(const corpus::NBest& nbest,
                                    const corpus::MemoryEntry& entry) const {
  Graph g(params_);
  const EncodedNBest keys = encode_nbest(g, nbest);
  return g.scalar(score(g, keys, encode_memory(g, entry.utterance.tokens)));
}

std::vector<double> RetrievalModel::score_entries(const corpus::NBest& nbest,
                                                  const corpus::UserMemory& memory) const {
  std::vector<double> scores;
  if (memory.entries.empty()) return scores;
  Graph g(params_);
  const EncodedNBest keys = encode_nbest(g, nbest);
  scores.reserve(memory.entries.size());
  for (const auto& e : memory.entries) {
    scores.push_back(g.scalar(score(g, keys, encode_memory(g, e.utterance.tokens))));
  }
  return scores;
}

std::vector<ScoredMemory> RetrievalModel::rank(const corpus::NBest& nbest,
                                               const corpus::UserMemory& memory) const {
  const std::vector<double> s = score_entries(nbest, memory);
  std::vector<ScoredMemory> out;
  for (std::size_t i = 0; i < s.size(); ++i) out.push_back({memory.entries[i], s[i]});
  std::stable_sort(out.begin(), out.end(),
                   [](const ScoredMemory& a, const ScoredMemory& b) { return a.score > b.score; });
  return out;
}

RewriteDecision RetrievalModel::retrieve(const corpus::NBest& nbest,
                                         const corpus::UserMemory& memory,
                                         double threshold) const {
  RewriteDecision d;
  const std::vector<double> s = score_entries(nbest, memory);
  if (s.empty()) return d;
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] > s[best]) best = i;
  }
  d.candidate = memory.entries[best].utterance.tokens;
  d.probability = s[best];
  d.rewrite = s[best] >= threshold;
  return d;
}

UnitLoss RetrievalModel::pair_loss(const nn::ParamStore& params,
                                   const corpus::RephrasePair& pair,
                                   const corpus::UserMemory& memory, double negative_weight,
                                   nn::Gradients* grads) const {
  UnitLoss out;
  if (memory.entries.empty()) return out;
  Graph g(params);
  const EncodedNBest keys = encode_nbest(g, pair.first_turn);
  std::vector<Expr> terms;
  for (const auto& e : memory.entries) {
    const bool positive = corpus::semantic_match(e.utterance, pair.rephrase);
    const double w = positive ? 1.0 : negative_weight;
    if (w <= 0.0) continue;
    const Expr p = score(g, keys, encode_memory(g, e.utterance.tokens));
    terms.push_back(g.scale(g.binary_cross_entropy(p, positive ? 1.0 : 0.0), w));
    out.weight += w;
  }
  if (terms.empty()) return out;
  const Expr loss = g.sum(terms);
  out.loss_sum = g.scalar(loss);
  if (grads != nullptr) g.backward(loss, *grads);
  return out;
}

double negative_weight(const corpus::DatasetSplit& split, double negatives_per_positive) {
  double pos = 0.0;
  double neg = 0.0;
  for (const auto& p : split.train) {
    auto it = split.memories.find(p.user_id);
    if (it == split.memories.end()) continue;
    for (const auto& e : it->second.entries) {
      (corpus::semantic_match(e.utterance, p.rephrase) ? pos : neg) += 1.0;
    }
  }
  if (neg == 0.0) return 1.0;
  return std::min(1.0, negatives_per_positive * pos / neg);
}

LossTrace train_retrieval(RetrievalModel& model, nn::Adam& adam,
                          const corpus::DatasetSplit& split,
                          const RetrievalTrainConfig& config, const EpochCallback& on_epoch) {
  const double neg_w = negative_weight(split, config.negatives_per_positive);
  static const corpus::UserMemory kEmpty;
  std::vector<const corpus::UserMemory*> mems;
  std::vector<double> sizes;
  for (const auto& p : split.train) {
    auto it = split.memories.find(p.user_id);
    const corpus::UserMemory* m = it == split.memories.end() ? &kEmpty : &it->second;
    mems.push_back(m);
    sizes.push_back(static_cast<double>(m->entries.size()));
  }
  return train_units(
      model.params(), adam, sizes, config.options,
      [&](const nn::ParamStore& params, std::size_t i, nn::Gradients* grads) {
        return model.pair_loss(params, split.train[i], *mems[i], neg_w, grads);
      },
      on_epoch);
}

}  // namespace memrw::retrieval
