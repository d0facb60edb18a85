#include "refine/gavie.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <optional>

namespace refine {

void GavieItem::validate() const {
  auto in_range = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 10.0; };
  if (!in_range(accuracy_score) || !in_range(relevancy_score)) {
    throw EvalError(EvalError::Kind::invalid_score, "GAVIE item '" + id + "': scores must be in [0, 10]");
  }
}

void from_json(const json& j, GavieItem& v) {
  v.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  v.accuracy_score = j.at("accuracy_score").get<double>();
  v.relevancy_score = j.at("relevancy_score").get<double>();
}

double round_half_up(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double scaled = x * scale;
  const double nudge = std::max(1e-9, std::abs(scaled) * 1e-12);
  return std::floor(scaled + 0.5 + nudge) / scale;
}

double gavie_average(double acc_mean, double rel_mean) { return round_half_up((acc_mean + rel_mean) / 2.0, 2); }

GavieSummary score_gavie(std::span<const GavieItem> items) {
  if (items.empty()) throw EvalError(EvalError::Kind::empty_input, "score_gavie: no items");
  double acc = 0.0, rel = 0.0;
  for (const auto& it : items) {
    it.validate();
    acc += it.accuracy_score;
    rel += it.relevancy_score;
  }
  const auto n = static_cast<double>(items.size());
  GavieSummary s;
  s.acc_mean = acc / n;
  s.rel_mean = rel / n;
  s.avg = gavie_average(s.acc_mean, s.rel_mean);
  s.n = items.size();
  return s;
}

std::pair<double, double> parse_gavie_scores(std::string_view text) {
  auto field = [&](std::string_view key) -> double {
    std::optional<double> found;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      std::string line(text.substr(start, end - start));
      const auto b = line.find_first_not_of(" \t");
      if (b != std::string::npos) line.erase(0, b);
      if (line.size() > key.size() && line[key.size()] == ':') {
        bool match = true;
        for (std::size_t i = 0; i < key.size(); ++i) {
          match &= std::tolower(static_cast<unsigned char>(line[i])) == key[i];
        }
        if (match) {
          const char* p = line.c_str() + key.size() + 1;
          char* endp = nullptr;
          const double v = std::strtod(p, &endp);
          if (endp != p) found = v;
        }
      }
      start = end + 1;
    }
    if (!found) {
      throw EvalError(EvalError::Kind::judge_parse, "JudgeParseError: no '" + std::string(key) + ": <score>' line");
    }
    if (!(*found >= 0.0 && *found <= 10.0)) {
      throw EvalError(EvalError::Kind::judge_parse, "JudgeParseError: " + std::string(key) + " outside [0, 10]");
    }
    return *found;
  };
  return {field("accuracy"), field("relevancy")};
}

GavieItem judge_gavie(Backend& judge, const std::string& id, const std::string& question,
                      const std::string& image_content, const std::string& response, const TemplateSet& templates) {
  const Bindings b = {{"image_content", image_content}, {"question", question}, {"response", response}};
  GenerationRequest req;
  req.messages.push_back({Role::user, {Segment::text(templates.judge(JudgeKind::gavie).render_text(b))}});
  req.stage = "gavie_judge";
  const auto result = judge.generate(req);
  const auto [acc, rel] = parse_gavie_scores(result.text);
  return GavieItem{id, acc, rel};
}

json to_json(const GavieSummary& s) {
  return json{{"benchmark", "gavie"}, {"acc_mean", s.acc_mean}, {"rel_mean", s.rel_mean}, {"avg", s.avg}, {"n", s.n}};
}

}  // namespace refine
