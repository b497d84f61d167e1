#pragma once

// Seeded generator for the synthetic smart-home rephrase corpus.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "memrw/corpus.hpp"
#include "memrw/grammar.hpp"

namespace memrw::corpus {

using ConfusionTable = std::map<std::string, std::vector<std::string>>;

ConfusionTable default_confusions();

struct GenConfig {
  Grammar grammar = Grammar::smart_home();
  ConfusionTable confusions = default_confusions();
  int n_users = 200;
  int n_pairs = 5000;
  int devices_min = 3;
  int devices_max = 8;
  int successes_min = 15;
  int successes_max = 40;
  double thermostat_rate = 0.4;
  // Fraction of pairs whose rephrase has no semantic match in memory.
  double p_nr = 0.3;
  // Share of non-rewritable pairs whose first turn is a different command.
  double p_changed_mind = 0.1;
  // Probability that the spoken utterance itself appears below rank 1.
  // Other lower-ranked hypotheses keep the rank-1 errors.
  double p_truth_in_nbest = 0.4;
  // Per-token probability of an acoustic confusion on a word the rank-1
  // hypothesis heard correctly (at least 0.8 for rank 1 itself).
  double p_confuse = 0.6;
  double p_drop = 0.03;
  // On/off commands spoken as "<wrong intent> no <command>".
  double p_self_correction = 0.1;
  double p_preferred_template = 0.8;
  // Rewritable rephrases reuse the memory entry's exact wording this often.
  double p_same_surface = 0.7;
  // Probability of flipping a pair's rewritable flag after labeling.
  double label_noise = 0.0;
  int nbest_size = 5;
  double train_ratio = 0.8;

  // Throws Error(kConfig) with a "config error: ..." message.
  void validate() const;
  friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

// Pure function of (cfg, seed). Memories are drawn from each user's habits
// before any pair is built; pairs are then split 80/20 by user.
DatasetSplit generate_synthetic(const GenConfig& cfg, std::uint64_t seed);

}  // namespace memrw::corpus
