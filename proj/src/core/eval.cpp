#include "memrw/eval.hpp"

#include <algorithm>
#include <cstdio>

#include "memrw/error.hpp"

namespace memrw::eval {

Prediction make_prediction(const corpus::RephrasePair& pair, const RewriteDecision& decision,
                           const corpus::Grammar& grammar) {
  Prediction p;
  p.rewritable = pair.rewritable;
  p.rewrite = decision.candidate;
  p.probability = std::clamp(decision.probability, 0.0, 1.0);
  if (p.rewrite) {
    if (const auto u = grammar.annotate(*p.rewrite)) {
      p.match = corpus::semantic_match(*u, pair.rephrase);
      p.intent_match = u->intent == pair.rephrase.intent;
    }
  }
  return p;
}

Outcome classify(const Prediction& pred, double threshold) {
  const bool fires = pred.rewrite.has_value() && pred.probability >= threshold;
  if (fires) return pred.match ? Outcome::kTP : Outcome::kFP;
  return pred.rewritable ? Outcome::kFN : Outcome::kTN;
}

Confusion confusion_at(const std::vector<Prediction>& preds, double threshold) {
  Confusion c;
  for (const auto& p : preds) {
    switch (classify(p, threshold)) {
      case Outcome::kTP:
        ++c.tp;
        break;
      case Outcome::kFP:
        ++c.fp;
        break;
      case Outcome::kFN:
        ++c.fn;
        break;
      case Outcome::kTN:
        ++c.tn;
        break;
    }
  }
  return c;
}

PRCurve pr_curve(const std::vector<Prediction>& preds) {
  if (preds.empty()) throw Error(ErrorCode::kInvalidArgument, "no predictions");
  std::vector<double> thresholds{0.0, 1.0};
  for (const auto& p : preds) thresholds.push_back(p.probability);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  // Firing predictions sorted by probability; sweeping the threshold upward
  // stops them firing one probability level at a time.
  std::vector<const Prediction*> firing;
  Confusion base;
  for (const auto& p : preds) {
    if (p.rewrite) {
      firing.push_back(&p);
    } else if (p.rewritable) {
      ++base.fn;
    } else {
      ++base.tn;
    }
  }
  std::sort(firing.begin(), firing.end(), [](const Prediction* a, const Prediction* b) {
    return a->probability < b->probability;
  });
  Confusion c = base;
  for (const Prediction* p : firing) {
    if (p->match) {
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  PRCurve curve;
  std::size_t next = 0;
  for (double t : thresholds) {
    while (next < firing.size() && firing[next]->probability < t) {
      const Prediction& p = *firing[next++];
      if (p.match) {
        --c.tp;
      } else {
        --c.fp;
      }
      if (p.rewritable) {
        ++c.fn;
      } else {
        ++c.tn;
      }
    }
    if (c.tp + c.fp == 0) continue;
    PRPoint pt;
    pt.threshold = t;
    pt.counts = c;
    pt.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    pt.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    curve.push_back(pt);
  }
  if (curve.empty()) throw Error(ErrorCode::kInvalidArgument, "degenerate curve");
  return curve;
}

double auc_pr(const PRCurve& curve) {
  double area = 0.0;
  double prev_recall = 0.0;
  for (auto it = curve.rbegin(); it != curve.rend(); ++it) {
    area += it->precision * (it->recall - prev_recall);
    prev_recall = it->recall;
  }
  return area;
}

namespace {

const PRPoint* best_at_precision(const PRCurve& curve, double p) {
  const PRPoint* best = nullptr;
  for (const auto& pt : curve) {
    if (pt.precision >= p && (best == nullptr || pt.recall >= best->recall)) best = &pt;
  }
  return best;
}

}  // namespace

std::optional<double> recall_at_precision(const PRCurve& curve, double p) {
  const PRPoint* pt = best_at_precision(curve, p);
  if (pt == nullptr) return std::nullopt;
  return pt->recall;
}

std::optional<double> operating_threshold(const PRCurve& curve, double p) {
  const PRPoint* pt = best_at_precision(curve, p);
  if (pt == nullptr) return std::nullopt;
  return pt->threshold;
}

std::optional<double> intent_error_rate(const std::vector<Prediction>& preds, double threshold) {
  long fired = 0;
  long wrong = 0;
  for (const auto& p : preds) {
    if (!p.rewrite || p.probability < threshold) continue;
    ++fired;
    if (!p.intent_match) ++wrong;
  }
  if (fired == 0) return std::nullopt;
  return static_cast<double>(wrong) / static_cast<double>(fired);
}

Metrics compute_metrics(const std::vector<Prediction>& preds) {
  Metrics m;
  m.n_eval = static_cast<long>(preds.size());
  if (std::none_of(preds.begin(), preds.end(), [](const Prediction& p) { return p.rewrite; })) {
    m.confusion = confusion_at(preds, 0.0);
    return m;
  }
  const PRCurve curve = pr_curve(preds);
  m.auc_pr = auc_pr(curve);
  m.recall_at_p90 = recall_at_precision(curve, 0.9);
  m.operating_threshold = operating_threshold(curve, 0.9);
  if (m.operating_threshold) {
    m.intent_error_rate = intent_error_rate(preds, *m.operating_threshold);
    m.confusion = confusion_at(preds, *m.operating_threshold);
  } else {
    m.confusion = confusion_at(preds, 0.0);
  }
  return m;
}

nlohmann::ordered_json to_json(const Metrics& m) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    if (v) return *v;
    return "N/A";
  };
  nlohmann::ordered_json j;
  j["auc_pr"] = m.auc_pr;
  j["recall_at_p90"] = opt(m.recall_at_p90);
  j["intent_error_rate"] = opt(m.intent_error_rate);
  j["operating_threshold"] = opt(m.operating_threshold);
  j["confusion"] = {{"tp", m.confusion.tp},
                    {"fp", m.confusion.fp},
                    {"fn", m.confusion.fn},
                    {"tn", m.confusion.tn}};
  j["n_eval"] = m.n_eval;
  return j;
}

void write_prcurve_csv(std::ostream& out, const PRCurve& curve) {
  out << "threshold,precision,recall\n";
  char buf[96];
  for (const auto& pt : curve) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", pt.threshold, pt.precision, pt.recall);
    out << buf;
  }
}

}  // namespace memrw::eval
