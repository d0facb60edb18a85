#pragma once

#include <span>
#include <string>
#include <utility>

#include "refine/backend.hpp"
#include "refine/eval_common.hpp"
#include "refine/templates.hpp"

namespace refine {

struct GavieItem {
  std::string id;
  double accuracy_score = 0.0;   // 0..10
  double relevancy_score = 0.0;  // 0..10

  void validate() const;
};

void from_json(const json& j, GavieItem& v);

struct GavieSummary {
  double acc_mean = 0.0;
  double rel_mean = 0.0;
  double avg = 0.0;  // (acc_mean + rel_mean) / 2, rounded half-up to 2 decimals
  std::size_t n = 0;
};

// Half-up rounding at `decimals` places. Values within 1e-9 (relative) of a
// tie are treated as the tie, so 7.825 stored as 7.82499... still rounds up.
double round_half_up(double x, int decimals);

double gavie_average(double acc_mean, double rel_mean);

GavieSummary score_gavie(std::span<const GavieItem> items);

// Reads "Accuracy: <x>" and "Relevancy: <y>" lines; each must be in [0, 10].
std::pair<double, double> parse_gavie_scores(std::string_view judge_text);

GavieItem judge_gavie(Backend& judge, const std::string& id, const std::string& question,
                      const std::string& image_content, const std::string& response,
                      const TemplateSet& templates = TemplateSet::defaults());

json to_json(const GavieSummary& s);

}  // namespace refine
