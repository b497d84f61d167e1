#include "memrw/pointer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "memrw/error.hpp"
#include "memrw/rng.hpp"

namespace memrw::pointer {

using nn::Expr;
using nn::Graph;
using nn::Index;

void PointerConfig::validate() const {
  if (embedding_dim < 1 || hidden_dim < 1 || attention_dim < 1) {
    throw Error(ErrorCode::kConfig, "config error: dimensions must be positive");
  }
  if (nbest_size < 1 || nbest_size > static_cast<int>(corpus::kMaxNBest)) {
    throw Error(ErrorCode::kConfig, "config error: nbest_size must be in [1, 5]");
  }
  if (max_len < 1) throw Error(ErrorCode::kConfig, "config error: max_len must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::kConfig, "config error: lambda must be in [0, 1]");
  }
}

double rewrite_probability(std::span<const double> word_probs, std::span<const double> rw_probs) {
  if (word_probs.empty() || rw_probs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "rewrite_probability: empty array");
  }
  auto has_zero = [](std::span<const double> xs) {
    return std::any_of(xs.begin(), xs.end(), [](double x) { return x <= 0.0; });
  };
  if (has_zero(word_probs) || has_zero(rw_probs)) return 0.0;
  auto mean_log = [](std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += std::log(std::clamp(x, nn::kProbFloor, 1.0));
    return s / static_cast<double>(xs.size());
  };
  return std::exp(0.5 * (mean_log(word_probs) + mean_log(rw_probs)));
}

PointerModel::PointerModel(subword::SubwordVocab vocab, PointerConfig config,
                           std::vector<std::string> generation_words)
    : vocab_(std::move(vocab)), config_(config), generation_words_(std::move(generation_words)) {
  config_.validate();
  if (config_.generation_vocab && generation_words_.empty()) {
    generation_words_.push_back(kEosWord);
  }
  if (!config_.generation_vocab) generation_words_.clear();
  const Index e = config_.embedding_dim;
  const Index h = config_.hidden_dim;
  const Index a = config_.attention_dim;
  const auto kind = config_.attention_kind;
  embedding_ = subword::EmbeddingTable::create(params_, "emb", e, vocab_.size());
  nbest_encoder_ = nn::BiLstm::create(params_, "nbest_enc", e, h);
  memory_encoder_ = nn::BiLstm::create(params_, "mem_enc", e + 1, h);
  init_ = nn::Dense::create(params_, "dec_init", 2 * h, h);
  decoder_ = nn::Lstm::create(params_, "dec", e, h);
  nbest_word_att_ = nn::Attention::create(params_, "nbest_word_att", kind, h, 2 * h, a);
  nbest_utt_att_ = nn::Attention::create(params_, "nbest_utt_att", kind, h, 2 * h, a);
  memory_word_att_ = nn::Attention::create(params_, "mem_word_att", kind, 3 * h, 2 * h, a);
  memory_utt_att_ = nn::Attention::create(params_, "mem_utt_att", kind, 3 * h, 2 * h, a);
  gate_ = nn::Dense::create(params_, "gate", 5 * h, config_.generation_vocab ? 3 : 2);
  rewritable_ = nn::Dense::create(params_, "rewritable", 5 * h, 1);
  if (config_.generation_vocab) {
    generator_ = nn::Dense::create(params_, "generator", 5 * h,
                                   static_cast<Index>(generation_words_.size()));
  }
}

void PointerModel::initialize(std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "init");
  params_.init_uniform(rng);
  nbest_encoder_.set_forget_bias(params_, 1.0);
  memory_encoder_.set_forget_bias(params_, 1.0);
  decoder_.set_forget_bias(params_, 1.0);
}

int PointerModel::word_id(Sources& s, const std::string& w) const {
  auto [it, inserted] = s.word_index.emplace(w, static_cast<int>(s.words.size()));
  if (inserted) s.words.push_back(w);
  return it->second;
}

Expr PointerModel::memory_inputs(Graph& g, const corpus::MemoryEntry& entry) const {
  const Expr emb = embed_tokens(g, embedding_, vocab_, entry.utterance.tokens);
  const Index t = static_cast<Index>(entry.utterance.tokens.size());
  const double f = std::log1p(static_cast<double>(entry.frequency));
  const std::array<Expr, 2> rows{emb, g.constant(nn::Matrix::Constant(1, t, f))};
  return g.vcat(rows);
}

EncodedSource PointerModel::encode_source(Graph& g, const std::vector<corpus::Tokens>& utts,
                                          const std::vector<int>* frequencies,
                                          const nn::BiLstm& encoder,
                                          const nn::Attention& word_att,
                                          const nn::Attention& utt_att, Sources& s) const {
  EncodedSource src;
  std::vector<Expr> parts;
  src.offsets.push_back(0);
  for (std::size_t u = 0; u < utts.size(); ++u) {
    const Index t = static_cast<Index>(utts[u].size());
    const Expr x = frequencies == nullptr
                       ? embed_tokens(g, embedding_, vocab_, utts[u])
                       : memory_inputs(g, {{utts[u], "", {}}, (*frequencies)[u]});
    parts.push_back(encoder.encode(g, x));
    src.offsets.push_back(src.offsets.back() + t);
    for (const auto& w : utts[u]) src.word_ids.push_back(word_id(s, w));
  }
  src.keys = parts.size() == 1 ? parts[0] : g.hcat(parts);
  src.word_keys = word_att.project_keys(g, src.keys);
  src.utt_keys = utt_att.project_keys(g, src.keys);
  return src;
}

Sources PointerModel::encode_sources(Graph& g, const corpus::NBest& nbest,
                                     const corpus::UserMemory* memory) const {
  nbest.validate();
  Sources s;
  std::vector<corpus::Tokens> hyps;
  const std::size_t n = std::min<std::size_t>(nbest.hyps.size(), config_.nbest_size);
  for (std::size_t i = 0; i < n; ++i) {
    hyps.push_back(nbest.hyps[i]);
    hyps.back().push_back(kEosWord);
  }
  s.nbest = encode_source(g, hyps, nullptr, nbest_encoder_, nbest_word_att_, nbest_utt_att_, s);
  if (!config_.no_memory && memory != nullptr && !memory->entries.empty()) {
    std::vector<corpus::Tokens> utts;
    std::vector<int> freqs;
    for (const auto& e : memory->entries) {
      utts.push_back(e.utterance.tokens);
      freqs.push_back(e.frequency);
    }
    s.memory = encode_source(g, utts, &freqs, memory_encoder_, memory_word_att_,
                             memory_utt_att_, s);
  }
  for (const auto& w : generation_words_) s.generation_ids.push_back(word_id(s, w));
  s.init_h = init_.apply(g, g.mean_cols(s.nbest.keys), nn::Activation::kTanh);
  s.init_c = g.constant(nn::Matrix::Zero(config_.hidden_dim, 1));
  return s;
}

HierarchicalOutput PointerModel::attend(Graph& g, Expr query, const EncodedSource& src,
                                        const nn::Attention& word_att,
                                        const nn::Attention& utt_att,
                                        std::size_t n_words) const {
  HierarchicalOutput out;
  out.word_weights = g.segment_softmax(word_att.scores(g, query, src.word_keys), src.offsets);
  const Expr utt_keys = g.segment_weighted_sum(src.utt_keys, out.word_weights, src.offsets);
  out.utt_weights = g.softmax(utt_att.scores(g, query, utt_keys));
  const Expr summaries = g.segment_weighted_sum(src.keys, out.word_weights, src.offsets);
  out.context = g.matmul(summaries, out.utt_weights);
  const Expr mass = g.segment_scale(out.word_weights, out.utt_weights, src.offsets);
  out.copy = g.scatter_add(mass, src.word_ids, static_cast<Index>(n_words));
  return out;
}

HierarchicalOutput PointerModel::attend_nbest(Graph& g, Expr query, const Sources& s) const {
  return attend(g, query, s.nbest, nbest_word_att_, nbest_utt_att_, s.words.size());
}

HierarchicalOutput PointerModel::attend_memory(Graph& g, Expr query, const Sources& s) const {
  if (!s.memory) throw Error(ErrorCode::kInvalidArgument, "no memory source");
  return attend(g, query, *s.memory, memory_word_att_, memory_utt_att_, s.words.size());
}

StepOutput PointerModel::decode_step(Graph& g, const Sources& s, nn::LstmState state,
                                     const std::string& prev_word) const {
  StepOutput out;
  const Expr x = embed_tokens(g, embedding_, vocab_, corpus::Tokens{prev_word});
  out.state = nn::lstm_cell(g, decoder_, x, state);
  const Expr h = out.state.h;
  const HierarchicalOutput nb = attend_nbest(g, h, s);
  out.nbest_context = nb.context;
  std::vector<Expr> components{nb.copy};
  std::vector<Index> gate_rows{0};
  if (s.memory) {
    const std::array<Expr, 2> q{h, nb.context};
    const HierarchicalOutput mem = attend_memory(g, g.vcat(q), s);
    out.memory_context = mem.context;
    components.push_back(mem.copy);
    gate_rows.push_back(1);
  } else {
    out.memory_context = g.constant(nn::Matrix::Zero(2 * config_.hidden_dim, 1));
  }
  const std::array<Expr, 3> feat_parts{h, nb.context, out.memory_context};
  const Expr feat = g.vcat(feat_parts);
  if (config_.generation_vocab) {
    const Expr gen = g.softmax(generator_.apply(g, feat));
    components.push_back(
        g.scatter_add(gen, s.generation_ids, static_cast<Index>(s.words.size())));
    gate_rows.push_back(2);
  }
  Expr logits = gate_.apply(g, feat);
  if (static_cast<Index>(gate_rows.size()) != g.value(logits).rows()) {
    logits = g.gather_rows(logits, gate_rows);
  }
  out.gates = g.softmax(logits);
  std::vector<Expr> terms;
  for (std::size_t k = 0; k < components.size(); ++k) {
    terms.push_back(g.scalar_mul(g.pick(out.gates, static_cast<Index>(k)), components[k]));
  }
  out.word_dist = terms.size() == 1 ? terms[0] : g.sum(terms);
  const std::array<Expr, 3> rw_parts{nb.context, out.memory_context, h};
  out.rewritable = rewritable_.apply(g, g.vcat(rw_parts), nn::Activation::kSigmoid);
  return out;
}

DecodeResult PointerModel::greedy_decode(const corpus::NBest& nbest,
                                         const corpus::UserMemory* memory) const {
  Graph g(params_);
  const Sources s = encode_sources(g, nbest, memory);
  DecodeResult r;
  nn::LstmState state = initial_state(s);
  std::string prev = kBosWord;
  for (int t = 0; t < config_.max_len; ++t) {
    const StepOutput step = decode_step(g, s, state, prev);
    const nn::Matrix& dist = g.value(step.word_dist);
    Index best = 0;
    for (Index i = 1; i < dist.rows(); ++i) {
      const double d = dist(i, 0);
      const double b = dist(best, 0);
      if (d > b || (d == b && s.words[static_cast<std::size_t>(i)] <
                                  s.words[static_cast<std::size_t>(best)])) {
        best = i;
      }
    }
    r.word_probs.push_back(dist(best, 0));
    r.rw_probs.push_back(g.scalar(step.rewritable));
    const std::string& w = s.words[static_cast<std::size_t>(best)];
    if (w == kEosWord) break;
    r.words.push_back(w);
    prev = w;
    state = step.state;
  }
  return r;
}

RewriteDecision PointerModel::rewrite(const corpus::NBest& nbest,
                                      const corpus::UserMemory* memory, double threshold) const {
  const DecodeResult r = greedy_decode(nbest, memory);
  RewriteDecision d;
  d.probability = rewrite_probability(r.word_probs, r.rw_probs);
  if (!r.words.empty()) d.candidate = r.words;
  d.rewrite = d.candidate.has_value() && d.probability >= threshold;
  return d;
}

Expr PointerModel::loss(Graph& g, const corpus::RephrasePair& pair,
                        const corpus::UserMemory* memory) const {
  const Sources s = encode_sources(g, pair.first_turn, memory);
  corpus::Tokens targets = pair.rephrase.tokens;
  targets.push_back(kEosWord);
  const double lambda = config_.lambda;
  const bool use_ce = pair.rewritable && lambda < 1.0;
  const double label = pair.rewritable ? 1.0 : 0.0;
  std::vector<Expr> ce;
  std::vector<Expr> bce;
  nn::LstmState state = initial_state(s);
  std::string prev = kBosWord;
  for (const auto& target : targets) {
    const StepOutput step = decode_step(g, s, state, prev);
    if (use_ce) {
      auto it = s.word_index.find(target);
      const Expr p = it == s.word_index.end()
                         ? g.constant(nn::Matrix::Constant(1, 1, nn::kProbFloor))
                         : g.pick(step.word_dist, it->second);
      ce.push_back(g.neg_log(p));
    }
    if (lambda > 0.0) bce.push_back(g.binary_cross_entropy(step.rewritable, label));
    state = step.state;
    prev = target;
  }
  const double t = static_cast<double>(targets.size());
  std::vector<Expr> terms;
  if (!ce.empty()) terms.push_back(g.scale(g.sum(ce), (1.0 - lambda) / t));
  if (!bce.empty()) terms.push_back(g.scale(g.sum(bce), lambda / t));
  if (terms.empty()) return g.constant(nn::Matrix::Zero(1, 1));
  return terms.size() == 1 ? terms[0] : g.sum(terms);
}

UnitLoss PointerModel::pair_loss(const nn::ParamStore& params, const corpus::RephrasePair& pair,
                                 const corpus::UserMemory* memory, nn::Gradients* grads) const {
  Graph g(params);
  const Expr l = loss(g, pair, memory);
  UnitLoss out{g.scalar(l), 1.0};
  if (grads != nullptr) g.backward(l, *grads);
  return out;
}

std::vector<std::string> generation_vocabulary(const corpus::DatasetSplit& split) {
  std::set<std::string> words{kEosWord};
  for (const auto& p : split.train) {
    words.insert(p.rephrase.tokens.begin(), p.rephrase.tokens.end());
  }
  return {words.begin(), words.end()};
}

LossTrace train_pointer(PointerModel& model, nn::Adam& adam, const corpus::DatasetSplit& split,
                        const PointerTrainConfig& config, const EpochCallback& on_epoch) {
  std::vector<const corpus::UserMemory*> mems;
  for (const auto& p : split.train) {
    auto it = split.memories.find(p.user_id);
    mems.push_back(it == split.memories.end() ? nullptr : &it->second);
  }
  const std::vector<double> sizes(split.train.size(), 1.0);
  return train_units(
      model.params(), adam, sizes, config.options,
      [&](const nn::ParamStore& params, std::size_t i, nn::Gradients* grads) {
        return model.pair_loss(params, split.train[i], mems[i], grads);
      },
      on_epoch);
}

}  // namespace memrw::pointer
