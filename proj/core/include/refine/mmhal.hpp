#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "refine/backend.hpp"
#include "refine/eval_common.hpp"
#include "refine/templates.hpp"

namespace refine {

enum class MMHalCategory { attribute, adversarial, comparison, counting, relation, environment, holistic, other };

inline constexpr MMHalCategory kMMHalCategories[] = {
    MMHalCategory::attribute, MMHalCategory::adversarial, MMHalCategory::comparison, MMHalCategory::counting,
    MMHalCategory::relation,  MMHalCategory::environment, MMHalCategory::holistic,   MMHalCategory::other};

std::string_view to_string(MMHalCategory c);
// Case-insensitive; "adversarial object" / "spatial relation" style labels
// used by the upstream benchmark file are accepted too.
MMHalCategory parse_mmhal_category(std::string_view s);

struct MMHalItem {
  std::string id;
  std::string image_ref;
  std::string question;
  MMHalCategory category = MMHalCategory::other;
  std::string image_content_text;
  std::string gold_answer;
};

void from_json(const json& j, MMHalItem& v);

struct MMHalJudgement {
  int score = 0;
  std::string judge_text;
};

struct MMHalScoredItem {
  std::string id;
  MMHalCategory category = MMHalCategory::other;
  int score = 0;
  std::string judge_text;
};

struct MMHalReport {
  std::map<MMHalCategory, double> per_category_mean;  // only categories present
  double overall_mean = 0.0;
  Fraction hallucination_rate;  // share of scores strictly below 3
  std::vector<MMHalScoredItem> items;
};

// Reads the `Rating: <k>` line of a judge reply. The last such line wins.
// Missing line or k outside [0, max_rating] -> EvalError(judge_parse).
int parse_rating(std::string_view judge_text, int max_rating = 5);

GenerationRequest build_mmhal_judge_request(const PromptTemplate& judge_template, const MMHalItem& item,
                                            const std::string& response);

MMHalJudgement judge_mmhal(Backend& judge, const MMHalItem& item, const std::string& response,
                           const TemplateSet& templates = TemplateSet::defaults(), int max_rating = 5);

// Item-parallel judging; results in input order.
std::vector<MMHalScoredItem> judge_mmhal_batch(Backend& judge, std::span<const MMHalItem> items,
                                               std::span<const std::string> responses, std::size_t parallelism,
                                               const TemplateSet& templates = TemplateSet::defaults(),
                                               int max_rating = 5);

MMHalReport score_mmhal(std::span<const MMHalScoredItem> scored, int max_rating = 5);

json to_json(const MMHalReport& r);

}  // namespace refine
