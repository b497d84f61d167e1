#pragma once

// Run configuration: every hyperparameter of data generation, sub-word
// learning and both models, read from one JSON file.

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "memrw/pointer.hpp"
#include "memrw/retrieval.hpp"
#include "memrw/synthetic.hpp"

namespace memrw {

struct RetrievalRunConfig {
  retrieval::RetrievalConfig model;
  int epochs = 12;
  double batch_size = 64;
  double learning_rate = 1e-3;
  double negatives_per_positive = 4.0;
  friend bool operator==(const RetrievalRunConfig&, const RetrievalRunConfig&) = default;
};

struct PointerRunConfig {
  pointer::PointerConfig model;
  int epochs = 8;
  double batch_size = 32;
  double learning_rate = 1e-3;
  friend bool operator==(const PointerRunConfig&, const PointerRunConfig&) = default;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  corpus::GenConfig data;
  int num_merges = 200;
  RetrievalRunConfig retrieval;
  PointerRunConfig pointer;

  // Throws Error(kConfig) with a "config error: ..." message.
  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

nlohmann::json to_json(const RunConfig& c);
// Missing keys keep their defaults; unknown keys and malformed values throw
// Error(kConfig). The result is validated.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Replaces the seed with MEMRW_SEED when that variable is set. Throws
// Error(kConfig) when it is not an unsigned integer.
void apply_env_overrides(RunConfig& c);

}  // namespace memrw
