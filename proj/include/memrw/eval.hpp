#pragma once

// Outcome classification and precision-recall metrics over a threshold
// sweep of rewrite probabilities.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "memrw/corpus.hpp"
#include "memrw/grammar.hpp"
#include "memrw/text.hpp"

namespace memrw::eval {

enum class Outcome { kTP, kFP, kFN, kTN };

struct Prediction {
  bool rewritable = false;
  std::optional<corpus::Tokens> rewrite;
  double probability = 0.0;
  // Whether the rewrite semantically matches the rephrase, and whether its
  // intent equals the rephrase intent. Unparseable rewrites match neither.
  bool match = false;
  bool intent_match = false;
};

// Annotates the candidate with the grammar and compares it to the rephrase.
Prediction make_prediction(const corpus::RephrasePair& pair, const RewriteDecision& decision,
                           const corpus::Grammar& grammar);

Outcome classify(const Prediction& pred, double threshold);

struct Confusion {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;
  long total() const { return tp + fp + fn + tn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

Confusion confusion_at(const std::vector<Prediction>& preds, double threshold);

struct PRPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  Confusion counts;
};

// Points in ascending threshold order.
using PRCurve = std::vector<PRPoint>;

// Thresholds are 0, 1 and every distinct probability. Points where nothing
// fires are skipped. Throws Error(kInvalidArgument) on empty input and
// "degenerate curve" when no point remains.
PRCurve pr_curve(const std::vector<Prediction>& preds);

// Average precision: sum of precision * recall increase, walking thresholds
// from high to low.
double auc_pr(const PRCurve& curve);

// Highest recall among points with precision >= p.
std::optional<double> recall_at_precision(const PRCurve& curve, double p);
// Threshold of that point (the highest one when several tie).
std::optional<double> operating_threshold(const PRCurve& curve, double p);

// Fraction of fired rewrites whose intent differs from the rephrase.
std::optional<double> intent_error_rate(const std::vector<Prediction>& preds, double threshold);

struct Metrics {
  double auc_pr = 0.0;
  std::optional<double> recall_at_p90;
  std::optional<double> operating_threshold;
  std::optional<double> intent_error_rate;
  Confusion confusion;
  long n_eval = 0;
};

// When no prediction carries a rewrite the AUC is 0 and the rest is N/A.
Metrics compute_metrics(const std::vector<Prediction>& preds);

nlohmann::ordered_json to_json(const Metrics& m);
void write_prcurve_csv(std::ostream& out, const PRCurve& curve);

}  // namespace memrw::eval
