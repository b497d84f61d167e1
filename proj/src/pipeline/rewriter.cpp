#include "memrw/rewriter.hpp"

#include <algorithm>
#include <set>

#include "memrw/error.hpp"
#include "memrw/subword.hpp"
#include "memrw/text.hpp"

namespace memrw {
namespace {

using nlohmann::json;

const corpus::UserMemory* find_memory(const corpus::MemoryMap& memories, const std::string& user) {
  auto it = memories.find(user);
  return it == memories.end() ? nullptr : &it->second;
}

json trace_json(const LossTrace& t) {
  return json{{"epoch_loss", t.epoch_loss}, {"batch_loss", t.batch_loss}};
}

LossTrace parse_trace(const std::string& s) {
  LossTrace t;
  if (s.empty()) return t;
  try {
    const json j = json::parse(s);
    j.at("epoch_loss").get_to(t.epoch_loss);
    j.at("batch_loss").get_to(t.batch_loss);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint loss trace: ") + e.what());
  }
  return t;
}

subword::SubwordVocab vocab_from(const Checkpoint& c) {
  if (c.symbols.size() < static_cast<std::size_t>(subword::kNumSpecials)) {
    throw Error(ErrorCode::kFormat, "checkpoint vocabulary lacks special symbols");
  }
  for (int i = 0; i < subword::kNumSpecials; ++i) {
    if (c.symbols[static_cast<std::size_t>(i)] != subword::kSpecialWords[i]) {
      throw Error(ErrorCode::kFormat, "checkpoint vocabulary has wrong special symbols");
    }
  }
  return subword::SubwordVocab(
      c.merges, std::vector<std::string>(c.symbols.begin() + subword::kNumSpecials, c.symbols.end()));
}

[[noreturn]] void mismatch(const std::string& what) {
  throw Error(ErrorCode::kMismatch, "checkpoint does not match model: " + what);
}

const nn::Matrix& take(const Checkpoint& c, const std::string& name, nn::Index rows,
                       nn::Index cols) {
  const NamedArray* a = c.find(name);
  if (a == nullptr) mismatch("missing array '" + name + "'");
  if (a->value.rows() != rows || a->value.cols() != cols) {
    mismatch("array '" + name + "' is " + std::to_string(a->value.rows()) + "x" +
             std::to_string(a->value.cols()) + ", expected " + std::to_string(rows) + "x" +
             std::to_string(cols));
  }
  return a->value;
}

}  // namespace

nlohmann::ordered_json generation_report(const corpus::DatasetSplit& split, std::uint64_t seed) {
  long rewritable = 0;
  for (const auto* side : {&split.train, &split.test}) {
    for (const auto& p : *side) rewritable += p.rewritable ? 1 : 0;
  }
  long entries = 0;
  for (const auto& [user, m] : split.memories) entries += static_cast<long>(m.entries.size());
  const long pairs = static_cast<long>(split.train.size() + split.test.size());
  nlohmann::ordered_json r;
  r["seed"] = seed;
  r["n_pairs"] = pairs;
  r["n_train"] = split.train.size();
  r["n_test"] = split.test.size();
  r["n_users"] = split.memories.size();
  r["n_memory_entries"] = entries;
  r["n_rewritable"] = rewritable;
  r["rewritable_fraction"] = pairs > 0 ? static_cast<double>(rewritable) / pairs : 0.0;
  return r;
}

Rewriter::Rewriter() = default;
Rewriter::Rewriter(Rewriter&&) noexcept = default;
Rewriter& Rewriter::operator=(Rewriter&&) noexcept = default;
Rewriter::~Rewriter() = default;

Rewriter Rewriter::create(ModelKind kind, const RunConfig& config,
                          const corpus::DatasetSplit& split) {
  config.validate();
  Rewriter r;
  r.config_ = config;
  if (kind == ModelKind::kPointer && config.pointer.model.no_memory) {
    kind = ModelKind::kPointerNoMemory;
  }
  if (kind == ModelKind::kPointerNoMemory) r.config_.pointer.model.no_memory = true;
  r.kind_ = kind;
  subword::SubwordVocab vocab = subword::learn_bpe(training_corpus(split), config.num_merges);
  if (kind == ModelKind::kRetrieval) {
    r.retrieval_ = std::make_unique<retrieval::RetrievalModel>(std::move(vocab),
                                                               r.config_.retrieval.model);
    r.retrieval_->initialize(config.seed);
    r.adam_ = std::make_unique<nn::Adam>(r.retrieval_->params(),
                                         nn::AdamConfig{.lr = config.retrieval.learning_rate});
  } else {
    std::vector<std::string> gen;
    if (r.config_.pointer.model.generation_vocab) gen = pointer::generation_vocabulary(split);
    r.pointer_ = std::make_unique<pointer::PointerModel>(std::move(vocab),
                                                         r.config_.pointer.model, std::move(gen));
    r.pointer_->initialize(config.seed);
    r.adam_ = std::make_unique<nn::Adam>(r.pointer_->params(),
                                         nn::AdamConfig{.lr = config.pointer.learning_rate});
  }
  return r;
}

Rewriter Rewriter::from_checkpoint(const Checkpoint& c) {
  Rewriter r;
  r.kind_ = c.kind;
  try {
    r.config_ = run_config_from_json(json::parse(c.config_json));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint config: ") + e.what());
  }
  if (r.config_.seed != c.seed) mismatch("seed differs from the stored config");
  if ((c.kind == ModelKind::kPointerNoMemory) != r.config_.pointer.model.no_memory &&
      c.kind != ModelKind::kRetrieval) {
    mismatch("model kind disagrees with pointer.no_memory");
  }
  r.epochs_completed_ = static_cast<int>(c.epochs_completed);
  r.trace_ = parse_trace(c.trace_json);
  subword::SubwordVocab vocab = vocab_from(c);
  double lr = 0.0;
  if (c.kind == ModelKind::kRetrieval) {
    if (!c.generation_words.empty()) mismatch("retrieval model with a generation vocabulary");
    r.retrieval_ = std::make_unique<retrieval::RetrievalModel>(std::move(vocab),
                                                               r.config_.retrieval.model);
    lr = r.config_.retrieval.learning_rate;
  } else {
    if (r.config_.pointer.model.generation_vocab == c.generation_words.empty()) {
      mismatch("generation vocabulary disagrees with pointer.generation_vocab");
    }
    r.pointer_ = std::make_unique<pointer::PointerModel>(
        std::move(vocab), r.config_.pointer.model, c.generation_words);
    lr = r.config_.pointer.learning_rate;
  }
  nn::ParamStore& params = r.mutable_params();
  std::set<std::string> expected;
  std::vector<nn::Matrix> m;
  std::vector<nn::Matrix> v;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const nn::ParamId id{i};
    const std::string& name = params.name(id);
    const nn::Index rows = params.value(id).rows();
    const nn::Index cols = params.value(id).cols();
    params.value(id) = take(c, name, rows, cols);
    m.push_back(take(c, "adam.m." + name, rows, cols));
    v.push_back(take(c, "adam.v." + name, rows, cols));
    expected.insert({name, "adam.m." + name, "adam.v." + name});
  }
  expected.insert("adam.step");
  for (const auto& a : c.arrays) {
    if (!expected.contains(a.name)) mismatch("unexpected array '" + a.name + "'");
  }
  const double step = take(c, "adam.step", 1, 1)(0, 0);
  r.adam_ = std::make_unique<nn::Adam>(params, nn::AdamConfig{.lr = lr});
  r.adam_->restore(static_cast<std::int64_t>(step), std::move(m), std::move(v));
  return r;
}

Rewriter Rewriter::load(const std::filesystem::path& path) {
  return from_checkpoint(load_checkpoint(path));
}

const subword::SubwordVocab& Rewriter::vocab() const {
  return retrieval_ ? retrieval_->vocab() : pointer_->vocab();
}

const nn::ParamStore& Rewriter::params() const {
  return retrieval_ ? retrieval_->params() : pointer_->params();
}

nn::ParamStore& Rewriter::mutable_params() {
  return retrieval_ ? retrieval_->params() : pointer_->params();
}

void Rewriter::set_threads(int threads) {
  if (threads < 1) throw Error(ErrorCode::kConfig, "config error: threads must be >= 1");
  config_.threads = threads;
}

LossTrace Rewriter::train(const corpus::DatasetSplit& split, int target_epochs,
                          const EpochCallback& on_epoch) {
  if (target_epochs < epochs_completed_) {
    throw Error(ErrorCode::kConfig, "config error: epochs " + std::to_string(target_epochs) +
                                        " is below the " + std::to_string(epochs_completed_) +
                                        " already completed");
  }
  TrainOptions options;
  options.epochs = target_epochs;
  options.start_epoch = epochs_completed_;
  options.threads = config_.threads;
  options.seed = config_.seed;
  LossTrace t;
  if (retrieval_) {
    config_.retrieval.epochs = target_epochs;
    options.batch_size = config_.retrieval.batch_size;
    retrieval::RetrievalTrainConfig tc{options, config_.retrieval.negatives_per_positive};
    t = retrieval::train_retrieval(*retrieval_, *adam_, split, tc, on_epoch);
  } else {
    config_.pointer.epochs = target_epochs;
    options.batch_size = config_.pointer.batch_size;
    t = pointer::train_pointer(*pointer_, *adam_, split, pointer::PointerTrainConfig{options},
                               on_epoch);
  }
  epochs_completed_ = target_epochs;
  trace_.epoch_loss.insert(trace_.epoch_loss.end(), t.epoch_loss.begin(), t.epoch_loss.end());
  trace_.batch_loss.insert(trace_.batch_loss.end(), t.batch_loss.begin(), t.batch_loss.end());
  return t;
}

RewriteDecision Rewriter::rewrite(const corpus::NBest& nbest, const corpus::UserMemory* memory,
                                  double threshold) const {
  if (retrieval_) {
    if (memory == nullptr) return {};
    return retrieval_->retrieve(nbest, *memory, threshold);
  }
  return pointer_->rewrite(nbest, memory, threshold);
}

std::vector<eval::Prediction> Rewriter::predict(const std::vector<corpus::RephrasePair>& pairs,
                                                const corpus::MemoryMap& memories) const {
  std::vector<eval::Prediction> out(pairs.size());
  parallel_for(pairs.size(), config_.threads, [&](std::size_t i) {
    const auto& p = pairs[i];
    const RewriteDecision d = rewrite(p.first_turn, find_memory(memories, p.user_id), 0.5);
    out[i] = eval::make_prediction(p, d, config_.data.grammar);
  });
  return out;
}

EvalResult Rewriter::evaluate(const corpus::DatasetSplit& split) const {
  EvalResult r;
  r.predictions = predict(split.test, split.memories);
  const bool any = std::any_of(r.predictions.begin(), r.predictions.end(),
                               [](const eval::Prediction& p) { return p.rewrite.has_value(); });
  if (any) r.curve = eval::pr_curve(r.predictions);
  r.metrics = eval::compute_metrics(r.predictions);
  return r;
}

Checkpoint Rewriter::checkpoint() const {
  Checkpoint c;
  c.kind = kind_;
  c.seed = config_.seed;
  c.epochs_completed = static_cast<std::uint32_t>(epochs_completed_);
  c.config_json = to_json(config_).dump();
  c.trace_json = trace_json(trace_).dump();
  c.merges = vocab().merges();
  c.symbols = vocab().symbols();
  if (pointer_) c.generation_words = pointer_->generation_words();
  const nn::ParamStore& params = this->params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    c.arrays.push_back({params.name(nn::ParamId{i}), params.value(nn::ParamId{i})});
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    c.arrays.push_back({"adam.m." + params.name(nn::ParamId{i}), adam_->first_moments()[i]});
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    c.arrays.push_back({"adam.v." + params.name(nn::ParamId{i}), adam_->second_moments()[i]});
  }
  c.arrays.push_back({"adam.step", nn::Matrix::Constant(1, 1, static_cast<double>(adam_->steps()))});
  return c;
}

void Rewriter::save(const std::filesystem::path& path) const { save_checkpoint(path, checkpoint()); }

}  // namespace memrw
