#pragma once

// End-to-end pipeline around one trained model: creation from a run config,
// training with resume, checkpoint persistence, rewriting and evaluation.

#include <filesystem>
#include <memory>
#include <vector>

#include "json.hpp"
#include "memrw/checkpoint.hpp"
#include "memrw/config.hpp"
#include "memrw/corpus.hpp"
#include "memrw/eval.hpp"
#include "memrw/nn/adam.hpp"
#include "memrw/pointer.hpp"
#include "memrw/retrieval.hpp"
#include "memrw/training.hpp"

namespace memrw {

// Counts and rewritable fraction of a generated dataset.
nlohmann::ordered_json generation_report(const corpus::DatasetSplit& split, std::uint64_t seed);

struct EvalResult {
  std::vector<eval::Prediction> predictions;
  eval::PRCurve curve;
  eval::Metrics metrics;
};

class Rewriter {
 public:
  // Learns the sub-word vocabulary on the training side of `split` and
  // initializes the model from config.seed. kPointerNoMemory forces
  // pointer.model.no_memory, and kPointer with no_memory set becomes
  // kPointerNoMemory.
  static Rewriter create(ModelKind kind, const RunConfig& config,
                         const corpus::DatasetSplit& split);
  // Throws Error(kMismatch) when the arrays do not fit the stored config.
  static Rewriter from_checkpoint(const Checkpoint& ckpt);
  static Rewriter load(const std::filesystem::path& path);

  Rewriter(Rewriter&&) noexcept;
  Rewriter& operator=(Rewriter&&) noexcept;
  ~Rewriter();

  ModelKind kind() const { return kind_; }
  const RunConfig& config() const { return config_; }
  int epochs_completed() const { return epochs_completed_; }
  const LossTrace& trace() const { return trace_; }
  const subword::SubwordVocab& vocab() const;
  const nn::ParamStore& params() const;

  // Worker threads for training and prediction; not part of the model.
  void set_threads(int threads);

  // Trains from epochs_completed() up to `target_epochs`, appending to the
  // trace. on_epoch receives 1-based epoch numbers.
  LossTrace train(const corpus::DatasetSplit& split, int target_epochs,
                  const EpochCallback& on_epoch = {});

  // A missing or empty memory makes the retrieval model abstain.
  RewriteDecision rewrite(const corpus::NBest& nbest, const corpus::UserMemory* memory,
                          double threshold) const;

  // One prediction per pair in input order; memories are looked up by user.
  std::vector<eval::Prediction> predict(const std::vector<corpus::RephrasePair>& pairs,
                                        const corpus::MemoryMap& memories) const;
  EvalResult evaluate(const corpus::DatasetSplit& split) const;

  Checkpoint checkpoint() const;
  void save(const std::filesystem::path& path) const;

 private:
  Rewriter();
  nn::ParamStore& mutable_params();

  ModelKind kind_ = ModelKind::kRetrieval;
  RunConfig config_;
  int epochs_completed_ = 0;
  LossTrace trace_;
  std::unique_ptr<retrieval::RetrievalModel> retrieval_;
  std::unique_ptr<pointer::PointerModel> pointer_;
  std::unique_ptr<nn::Adam> adam_;
};

}  // namespace memrw
