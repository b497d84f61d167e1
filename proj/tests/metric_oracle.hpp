#pragma once

// Brute-force metric oracle and random prediction sets shared by the tests.

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "memrw/eval.hpp"

namespace memrw::testing {

using eval::Prediction;

inline Prediction pred(bool rewritable, bool has_rewrite, bool match, double prob,
                       bool intent_match = true) {
  Prediction p;
  p.rewritable = rewritable;
  if (has_rewrite) p.rewrite = corpus::Tokens{"x"};
  p.match = has_rewrite && match;
  p.intent_match = has_rewrite && intent_match;
  p.probability = prob;
  return p;
}

struct OraclePoint {
  double threshold;
  double precision;
  double recall;
  long tp, fp, fn, tn;
};

// Exhaustive recomputation straight from the outcome definitions.
inline std::vector<OraclePoint> oracle_curve(const std::vector<Prediction>& preds) {
  std::set<double> ts{0.0, 1.0};
  for (const auto& p : preds) ts.insert(p.probability);
  std::vector<OraclePoint> out;
  for (double t : ts) {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto& p : preds) {
      const bool fires = p.rewrite && p.probability >= t;
      if (fires && p.match) ++tp;
      if (fires && !p.match) ++fp;
      if (!fires && p.rewritable) ++fn;
      if (!fires && !p.rewritable) ++tn;
    }
    if (tp + fp == 0) continue;
    out.push_back({t, double(tp) / double(tp + fp), tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn),
                   tp, fp, fn, tn});
  }
  return out;
}

inline double oracle_ap(std::vector<OraclePoint> pts) {
  std::sort(pts.begin(), pts.end(),
            [](const OraclePoint& a, const OraclePoint& b) { return a.threshold > b.threshold; });
  double ap = 0.0;
  double prev = 0.0;
  for (const auto& p : pts) {
    ap += p.precision * (p.recall - prev);
    prev = p.recall;
  }
  return ap;
}

inline std::vector<Prediction> random_preds(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(1, 100);
  std::uniform_int_distribution<int> level(0, 20);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution mostly(0.8);
  std::vector<Prediction> preds;
  const int n = size(rng);
  for (int i = 0; i < n; ++i) {
    const bool rewritable = coin(rng);
    const bool has = mostly(rng);
    preds.push_back(pred(rewritable, has, has && rewritable && coin(rng), level(rng) / 20.0,
                         coin(rng)));
  }
  if (std::none_of(preds.begin(), preds.end(), [](const Prediction& p) { return p.rewrite; })) {
    preds[0] = pred(true, true, true, 0.5);
  }
  return preds;
}

}  // namespace memrw::testing
