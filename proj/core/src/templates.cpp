#include "refine/templates.hpp"

#include <fstream>
#include <iterator>
#include <utility>

namespace refine {

namespace {

constexpr std::pair<std::string_view, std::string_view> kDefaultBodies[] = {
#include "refine_default_templates.inc"
};

bool is_name_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Calls on_text / on_placeholder for each piece of body.
template <class TextFn, class PlaceholderFn>
void tokenize(std::string_view body, TextFn on_text, PlaceholderFn on_placeholder) {
  std::size_t text_start = 0;
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      std::size_t j = i + 1;
      while (j < body.size() && is_name_char(body[j])) ++j;
      if (j > i + 1 && j < body.size() && body[j] == '}') {
        if (i > text_start) on_text(body.substr(text_start, i - text_start));
        on_placeholder(body.substr(i + 1, j - i - 1));
        i = j + 1;
        text_start = i;
        continue;
      }
    }
    ++i;
  }
  if (text_start < body.size()) on_text(body.substr(text_start));
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read template: " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

constexpr Stage kStages[] = {Stage::initial, Stage::critique, Stage::revise, Stage::decide, Stage::collect_feedback};

std::string_view judge_name(JudgeKind k) { return k == JudgeKind::mmhal ? "mmhal_judge" : "gavie_judge"; }

}  // namespace

TemplateError::TemplateError(Kind kind, std::string placeholder, const std::string& context)
    : std::runtime_error(std::string(kind == Kind::missing_placeholder ? "MissingPlaceholder" : "UnknownPlaceholder") +
                         " {" + placeholder + "} in template '" + context + "'"),
      kind_(kind),
      placeholder_(std::move(placeholder)) {}

std::vector<std::string> scan_placeholders(std::string_view body) {
  std::vector<std::string> out;
  tokenize(
      body, [](std::string_view) {}, [&](std::string_view name) { out.emplace_back(name); });
  return out;
}

PromptTemplate::PromptTemplate(std::string name, std::string body, std::set<std::string> required)
    : name_(std::move(name)), body_(std::move(body)), required_(std::move(required)) {
  std::set<std::string> seen;
  std::size_t image_count = 0;
  tokenize(
      body_, [&](std::string_view text) { pieces_.push_back({false, std::string(text)}); },
      [&](std::string_view ph) {
        std::string p(ph);
        if (!required_.contains(p)) {
          throw TemplateError(TemplateError::Kind::unknown_placeholder, p, name_);
        }
        if (p == kImagePlaceholder) ++image_count;
        seen.insert(p);
        pieces_.push_back({true, std::move(p)});
      });
  for (const auto& r : required_) {
    if (!seen.contains(r)) throw TemplateError(TemplateError::Kind::missing_placeholder, r, name_);
  }
  if (image_count > 1) {
    throw TemplateError(TemplateError::Kind::unknown_placeholder, std::string(kImagePlaceholder),
                        name_ + " (image placeholder repeated)");
  }
}

void PromptTemplate::check_bindings(const Bindings& bindings, const std::optional<std::string>& image_ref) const {
  for (const auto& r : required_) {
    if (r == kImagePlaceholder) {
      if (!image_ref) throw TemplateError(TemplateError::Kind::missing_placeholder, r, name_);
    } else if (!bindings.contains(r)) {
      throw TemplateError(TemplateError::Kind::missing_placeholder, r, name_);
    }
  }
  for (const auto& [key, _] : bindings) {
    if (key == kImagePlaceholder || !required_.contains(key)) {
      throw TemplateError(TemplateError::Kind::unknown_placeholder, key, name_);
    }
  }
  if (image_ref && !wants_image()) {
    throw TemplateError(TemplateError::Kind::unknown_placeholder, std::string(kImagePlaceholder), name_);
  }
}

std::vector<Segment> PromptTemplate::render_segments(const Bindings& bindings,
                                                     const std::optional<std::string>& image_ref) const {
  check_bindings(bindings, image_ref);
  std::vector<Segment> out;
  std::string text;
  for (const auto& piece : pieces_) {
    if (!piece.is_placeholder) {
      text += piece.value;
    } else if (piece.value == kImagePlaceholder) {
      if (!text.empty()) out.push_back(Segment::text(std::exchange(text, {})));
      out.push_back(Segment::image(*image_ref));
    } else {
      text += bindings.at(piece.value);
    }
  }
  if (!text.empty()) out.push_back(Segment::text(std::move(text)));
  return out;
}

std::string PromptTemplate::render_text(const Bindings& bindings) const {
  std::string out;
  for (const auto& seg : render_segments(bindings, std::nullopt)) out += seg.value;
  return out;
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::initial: return "initial";
    case Stage::critique: return "critique";
    case Stage::revise: return "revise";
    case Stage::decide: return "decide";
    case Stage::collect_feedback: return "collect_feedback";
  }
  return "?";
}

Stage parse_stage(std::string_view s) {
  for (auto st : kStages) {
    if (to_string(st) == s) return st;
  }
  throw ValidationError("unknown stage: '" + std::string(s) + "'");
}

const std::set<std::string>& required_placeholders(Stage s) {
  static const std::map<Stage, std::set<std::string>> table = {
      {Stage::initial, {"image", "question"}},
      {Stage::critique, {"image", "question", "best_response"}},
      {Stage::revise, {"image", "question", "best_response", "feedback"}},
      {Stage::decide, {"image", "question", "candidate_a", "candidate_b"}},
      {Stage::collect_feedback, {"objects", "captions", "question", "best_response", "gold_answer"}},
  };
  return table.at(s);
}

const std::set<std::string>& required_placeholders(JudgeKind k) {
  static const std::set<std::string> mmhal = {"category", "image_content", "question", "gold_answer", "response"};
  static const std::set<std::string> gavie = {"image_content", "question", "response"};
  return k == JudgeKind::mmhal ? mmhal : gavie;
}

StageTemplate StageTemplate::load(Stage stage, std::string body) {
  return StageTemplate{stage, PromptTemplate(std::string(to_string(stage)), std::move(body), required_placeholders(stage))};
}

GenerationRequest render(const StageTemplate& t, const Bindings& bindings, const std::optional<std::string>& image_ref,
                         const DecodeOptions& decode, std::chrono::milliseconds timeout) {
  GenerationRequest req;
  req.messages.push_back(MessagePart{Role::user, t.tmpl.render_segments(bindings, image_ref)});
  req.decode = decode;
  req.timeout = timeout;
  req.stage = std::string(to_string(t.stage));
  return req;
}

std::string_view default_template_body(std::string_view name) {
  for (const auto& [n, body] : kDefaultBodies) {
    if (n == name) return body;
  }
  throw ValidationError("no default template named '" + std::string(name) + "'");
}

TemplateSet TemplateSet::defaults() {
  TemplateSet set;
  for (auto st : kStages) set.set(StageTemplate::load(st, std::string(default_template_body(to_string(st)))));
  for (auto k : {JudgeKind::mmhal, JudgeKind::gavie}) {
    set.set_judge(k, PromptTemplate(std::string(judge_name(k)), std::string(default_template_body(judge_name(k))),
                                    required_placeholders(k)));
  }
  return set;
}

TemplateSet TemplateSet::load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("template directory not found: " + dir.string());
  TemplateSet set = defaults();
  for (auto st : kStages) {
    const auto file = dir / (std::string(to_string(st)) + ".txt");
    if (std::filesystem::exists(file)) set.set(StageTemplate::load(st, read_file(file)));
  }
  for (auto k : {JudgeKind::mmhal, JudgeKind::gavie}) {
    const auto file = dir / (std::string(judge_name(k)) + ".txt");
    if (std::filesystem::exists(file)) {
      set.set_judge(k, PromptTemplate(std::string(judge_name(k)), read_file(file), required_placeholders(k)));
    }
  }
  return set;
}

const StageTemplate& TemplateSet::stage(Stage s) const { return stages_.at(s); }
const PromptTemplate& TemplateSet::judge(JudgeKind k) const { return judges_.at(k); }

void TemplateSet::set(StageTemplate t) {
  const auto key = t.stage;
  stages_.insert_or_assign(key, std::move(t));
}

void TemplateSet::set_judge(JudgeKind k, PromptTemplate t) { judges_.insert_or_assign(k, std::move(t)); }

}  // namespace refine
