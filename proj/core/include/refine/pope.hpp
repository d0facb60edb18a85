#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "refine/eval_common.hpp"
#include "refine/types.hpp"

namespace refine {

enum class YesNo { yes, no, unparseable };
enum class PopeSplit { random, popular, adversarial };

std::string_view to_string(YesNo v);
std::string_view to_string(PopeSplit s);
PopeSplit parse_pope_split(std::string_view s);

// A leading yes/no word decides; otherwise the answer is whichever of the
// two words appears as a standalone word, if only one of them does.
YesNo parse_yes_no(std::string_view response_text);

struct PopeItem {
  std::string id;
  std::string image_ref;
  std::string question;
  YesNo label = YesNo::yes;  // yes or no only
  PopeSplit split = PopeSplit::random;
};

void from_json(const json& j, PopeItem& v);

struct Confusion {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0, unparseable = 0;

  std::int64_t total() const noexcept { return tp + fp + fn + tn + unparseable; }
  void add(YesNo label, YesNo predicted);
  bool operator==(const Confusion&) const = default;
};

// "yes" is the positive class. Unparseable predictions count in N (so
// they lower accuracy and yes-ratio) but in none of tp/fp/fn/tn.
struct PopeMetrics {
  Confusion counts;
  Fraction accuracy;
  Fraction precision;
  Fraction recall;
  Fraction f1;
  Fraction yes_ratio;
};

PopeMetrics pope_metrics(const Confusion& c);

struct PopeReport {
  std::map<PopeSplit, PopeMetrics> per_split;  // only splits that occur
  PopeMetrics overall;                         // pooled over all items
};

// responses[i] answers items[i].
PopeReport score_pope(std::span<const PopeItem> items, std::span<const std::string> responses);

json to_json(const PopeMetrics& m);
json to_json(const PopeReport& r);

}  // namespace refine
