#include "refine/pope.hpp"

#include <cctype>

namespace refine {

std::string_view to_string(YesNo v) {
  switch (v) {
    case YesNo::yes: return "yes";
    case YesNo::no: return "no";
    case YesNo::unparseable: return "unparseable";
  }
  return "?";
}

std::string_view to_string(PopeSplit s) {
  switch (s) {
    case PopeSplit::random: return "random";
    case PopeSplit::popular: return "popular";
    case PopeSplit::adversarial: return "adversarial";
  }
  return "?";
}

PopeSplit parse_pope_split(std::string_view s) {
  for (auto sp : {PopeSplit::random, PopeSplit::popular, PopeSplit::adversarial}) {
    if (to_string(sp) == s) return sp;
  }
  throw ValidationError("unknown POPE split: '" + std::string(s) + "'");
}

YesNo parse_yes_no(std::string_view text) {
  // Words are maximal runs of ASCII letters; everything else separates.
  bool first = true;
  bool saw_yes = false, saw_no = false;
  std::string word;
  auto flush = [&]() -> std::optional<YesNo> {
    if (word.empty()) return std::nullopt;
    const bool is_yes = word == "yes";
    const bool is_no = word == "no";
    if (first && (is_yes || is_no)) return is_yes ? YesNo::yes : YesNo::no;
    first = false;
    saw_yes |= is_yes;
    saw_no |= is_no;
    word.clear();
    return std::nullopt;
  };
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalpha(uc) && uc < 0x80) {
      word += static_cast<char>(std::tolower(uc));
    } else if (auto decided = flush()) {
      return *decided;
    }
  }
  if (auto decided = flush()) return *decided;
  if (saw_yes == saw_no) return YesNo::unparseable;
  return saw_yes ? YesNo::yes : YesNo::no;
}

void from_json(const json& j, PopeItem& v) {
  v.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  v.image_ref = j.value("image", std::string{});
  v.question = j.value("question", std::string{});
  const auto label = parse_yes_no(j.at("label").get<std::string>());
  if (label == YesNo::unparseable) throw ValidationError("POPE item '" + v.id + "': label must be yes or no");
  v.label = label;
  v.split = parse_pope_split(j.value("split", std::string("random")));
}

void Confusion::add(YesNo label, YesNo predicted) {
  if (predicted == YesNo::unparseable) {
    ++unparseable;
  } else if (label == YesNo::yes) {
    ++(predicted == YesNo::yes ? tp : fn);
  } else {
    ++(predicted == YesNo::yes ? fp : tn);
  }
}

PopeMetrics pope_metrics(const Confusion& c) {
  PopeMetrics m;
  m.counts = c;
  const auto n = c.total();
  m.accuracy = Fraction::of(c.tp + c.tn, n);
  m.precision = Fraction::of(c.tp, c.tp + c.fp);
  m.recall = Fraction::of(c.tp, c.tp + c.fn);
  const auto sum = m.precision + m.recall;
  m.f1 = sum.num == 0 ? Fraction{0, 1} : (Fraction{2, 1} * m.precision * m.recall) / sum;
  m.yes_ratio = Fraction::of(c.tp + c.fp, n);
  return m;
}

PopeReport score_pope(std::span<const PopeItem> items, std::span<const std::string> responses) {
  if (items.empty()) throw EvalError(EvalError::Kind::empty_input, "score_pope: no items");
  if (responses.size() != items.size()) {
    throw EvalError(EvalError::Kind::missing_response, "score_pope: every item needs exactly one response");
  }
  std::map<PopeSplit, Confusion> per_split;
  Confusion overall;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto pred = parse_yes_no(responses[i]);
    per_split[items[i].split].add(items[i].label, pred);
    overall.add(items[i].label, pred);
  }
  PopeReport r;
  for (const auto& [split, c] : per_split) r.per_split.emplace(split, pope_metrics(c));
  r.overall = pope_metrics(overall);
  return r;
}

json to_json(const PopeMetrics& m) {
  const auto& c = m.counts;
  return json{{"accuracy", m.accuracy.value()},
              {"precision", m.precision.value()},
              {"recall", m.recall.value()},
              {"f1", m.f1.value()},
              {"yes_ratio", m.yes_ratio.value()},
              {"counts",
               {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}, {"unparseable", c.unparseable}, {"n", c.total()}}}};
}

json to_json(const PopeReport& r) {
  json splits = json::object();
  for (const auto& [s, m] : r.per_split) splits[std::string(to_string(s))] = to_json(m);
  return json{{"benchmark", "pope"}, {"overall", to_json(r.overall)}, {"splits", std::move(splits)}};
}

}  // namespace refine
