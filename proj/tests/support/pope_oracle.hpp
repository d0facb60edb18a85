#pragma once

// Direct-count POPE reference. Counts straight from (label, prediction)
// pairs and keeps each metric as an unreduced numerator/denominator pair;
// F1 uses the count form 2tp / (2tp + fp + fn), not 2pr/(p+r).

#include <cstdint>
#include <vector>

#include "refine/eval_common.hpp"

namespace oracle {

struct Ratio {
  std::int64_t num;
  std::int64_t den;  // 0 means "undefined", which the harness reports as 0
};

// Zero-tolerance equality with the harness's reduced Fraction.
inline bool same(const Ratio& r, const refine::Fraction& f) {
  if (r.den == 0 || r.num == 0) return f.num == 0;
  return r.num * f.den == f.num * r.den;
}

struct PopeCounts {
  Ratio accuracy, precision, recall, f1, yes_ratio;
  std::int64_t unparseable = 0;
};

// label: true = yes. pred: 1 = yes, 0 = no, -1 = unparseable.
inline PopeCounts direct_count(const std::vector<bool>& labels, const std::vector<int>& preds) {
  std::int64_t n = 0, correct = 0, said_yes = 0, yes_and_right = 0, truly_yes_parsed = 0, bad = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++n;
    if (preds[i] < 0) {
      ++bad;
      continue;
    }
    const bool p = preds[i] == 1;
    if (p == labels[i]) ++correct;
    if (p) ++said_yes;
    if (p && labels[i]) ++yes_and_right;
    if (labels[i]) ++truly_yes_parsed;
  }
  const std::int64_t fp = said_yes - yes_and_right;
  const std::int64_t fn = truly_yes_parsed - yes_and_right;
  PopeCounts c;
  c.accuracy = {correct, n};
  c.precision = {yes_and_right, said_yes};
  c.recall = {yes_and_right, truly_yes_parsed};
  c.f1 = {2 * yes_and_right, 2 * yes_and_right + fp + fn};
  c.yes_ratio = {said_yes, n};
  c.unparseable = bad;
  return c;
}

}  // namespace oracle
