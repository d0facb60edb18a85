#include "refine/mmhal.hpp"

#include <cctype>
#include <charconv>

#include "refine/parallel.hpp"

namespace refine {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string_view to_string(MMHalCategory c) {
  switch (c) {
    case MMHalCategory::attribute: return "attribute";
    case MMHalCategory::adversarial: return "adversarial";
    case MMHalCategory::comparison: return "comparison";
    case MMHalCategory::counting: return "counting";
    case MMHalCategory::relation: return "relation";
    case MMHalCategory::environment: return "environment";
    case MMHalCategory::holistic: return "holistic";
    case MMHalCategory::other: return "other";
  }
  return "other";
}

MMHalCategory parse_mmhal_category(std::string_view s) {
  const auto l = lower(trim(s));
  for (auto c : kMMHalCategories) {
    const auto name = to_string(c);
    if (l == name) return c;
    // "adversarial object", "spatial relation", ...
    if (l.size() > name.size() && (l.starts_with(std::string(name) + " ") || l.ends_with(" " + std::string(name)))) {
      return c;
    }
  }
  throw ValidationError("unknown MMHal category: '" + std::string(s) + "'");
}

void from_json(const json& j, MMHalItem& v) {
  v.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  v.image_ref = j.value("image", std::string{});
  v.question = j.at("question").get<std::string>();
  v.category = parse_mmhal_category(j.at(j.contains("category") ? "category" : "question_type").get<std::string>());
  if (j.contains("image_content")) {
    const auto& c = j.at("image_content");
    if (c.is_array()) {
      std::string joined;
      for (const auto& part : c) {
        if (!joined.empty()) joined += ", ";
        joined += part.get<std::string>();
      }
      v.image_content_text = joined;
    } else {
      v.image_content_text = c.get<std::string>();
    }
  } else {
    v.image_content_text = j.value("image_content_text", std::string{});
  }
  v.gold_answer = j.at(j.contains("gold_answer") ? "gold_answer" : "gt_answer").get<std::string>();
}

int parse_rating(std::string_view judge_text, int max_rating) {
  std::optional<long long> found;
  std::size_t start = 0;
  while (start <= judge_text.size()) {
    auto end = judge_text.find('\n', start);
    if (end == std::string_view::npos) end = judge_text.size();
    auto line = trim(judge_text.substr(start, end - start));
    const auto l = lower(line);
    if (l.starts_with("rating:")) {
      auto rest = trim(line.substr(7));
      long long k = 0;
      const auto* first = rest.data();
      const auto* last = rest.data() + rest.size();
      if (!rest.empty() && rest.front() == '-') {
        throw EvalError(EvalError::Kind::judge_parse, "JudgeParseError: negative rating '" + std::string(rest) + "'");
      }
      auto [ptr, ec] = std::from_chars(first, last, k);
      const std::string_view tail(ptr, static_cast<std::size_t>(last - ptr));
      // Integers only: "4", "4.", "4/5" and "4 (good)" parse, "4.5" does not.
      const bool fractional = tail.size() > 1 && tail[0] == '.' && std::isdigit(static_cast<unsigned char>(tail[1]));
      if (ec != std::errc{} || fractional) {
        throw EvalError(EvalError::Kind::judge_parse, "JudgeParseError: malformed rating '" + std::string(rest) + "'");
      }
      found = k;
    }
    start = end + 1;
  }
  if (!found) throw EvalError(EvalError::Kind::judge_parse, "JudgeParseError: no 'Rating: <k>' line");
  if (*found < 0 || *found > max_rating) {
    throw EvalError(EvalError::Kind::judge_parse, "JudgeParseError: rating " + std::to_string(*found) +
                                                      " outside [0, " + std::to_string(max_rating) + "]");
  }
  return static_cast<int>(*found);
}

GenerationRequest build_mmhal_judge_request(const PromptTemplate& judge_template, const MMHalItem& item,
                                            const std::string& response) {
  const Bindings b = {{"category", std::string(to_string(item.category))},
                      {"image_content", item.image_content_text},
                      {"question", item.question},
                      {"gold_answer", item.gold_answer},
                      {"response", response}};
  GenerationRequest req;
  req.messages.push_back({Role::user, {Segment::text(judge_template.render_text(b))}});
  req.stage = "mmhal_judge";
  return req;
}

MMHalJudgement judge_mmhal(Backend& judge, const MMHalItem& item, const std::string& response,
                           const TemplateSet& templates, int max_rating) {
  auto result = judge.generate(build_mmhal_judge_request(templates.judge(JudgeKind::mmhal), item, response));
  return {parse_rating(result.text, max_rating), std::move(result.text)};
}

std::vector<MMHalScoredItem> judge_mmhal_batch(Backend& judge, std::span<const MMHalItem> items,
                                               std::span<const std::string> responses, std::size_t parallelism,
                                               const TemplateSet& templates, int max_rating) {
  if (responses.size() != items.size()) {
    throw EvalError(EvalError::Kind::missing_response, "judge_mmhal_batch: every item needs exactly one response");
  }
  std::vector<MMHalScoredItem> out(items.size());
  parallel_for(items.size(), parallelism, [&](std::size_t i) {
    auto j = judge_mmhal(judge, items[i], responses[i], templates, max_rating);
    out[i] = {items[i].id, items[i].category, j.score, std::move(j.judge_text)};
  });
  return out;
}

MMHalReport score_mmhal(std::span<const MMHalScoredItem> scored, int max_rating) {
  if (scored.empty()) throw EvalError(EvalError::Kind::empty_input, "score_mmhal: no scores");
  std::map<MMHalCategory, std::pair<long long, long long>> sums;  // sum, count
  long long total = 0, hallucinated = 0;
  for (const auto& s : scored) {
    if (s.score < 0 || s.score > max_rating) {
      throw EvalError(EvalError::Kind::invalid_score, "score_mmhal: score " + std::to_string(s.score) +
                                                          " out of range for item '" + s.id + "'");
    }
    auto& [sum, count] = sums[s.category];
    sum += s.score;
    ++count;
    total += s.score;
    if (s.score < 3) ++hallucinated;
  }
  MMHalReport r;
  for (const auto& [cat, sc] : sums) {
    r.per_category_mean[cat] = static_cast<double>(sc.first) / static_cast<double>(sc.second);
  }
  const auto n = static_cast<long long>(scored.size());
  r.overall_mean = static_cast<double>(total) / static_cast<double>(n);
  r.hallucination_rate = Fraction::of(hallucinated, n);
  r.items.assign(scored.begin(), scored.end());
  return r;
}

json to_json(const MMHalReport& r) {
  json cats = json::object();
  for (const auto& [c, m] : r.per_category_mean) cats[std::string(to_string(c))] = m;
  json items = json::array();
  for (const auto& s : r.items) {
    items.push_back({{"id", s.id}, {"category", to_string(s.category)}, {"score", s.score}, {"judge_text", s.judge_text}});
  }
  return json{{"benchmark", "mmhal"},
              {"overall_score", r.overall_mean},
              {"hallucination_rate", r.hallucination_rate.value()},
              {"per_category", std::move(cats)},
              {"n", r.items.size()},
              {"items", std::move(items)}};
}

}  // namespace refine
