#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "refine/backend.hpp"

namespace refine {

using Bindings = std::map<std::string, std::string>;

class TemplateError : public std::runtime_error {
 public:
  enum class Kind { missing_placeholder, unknown_placeholder };

  TemplateError(Kind kind, std::string placeholder, const std::string& context);

  Kind kind() const noexcept { return kind_; }
  const std::string& placeholder() const noexcept { return placeholder_; }

 private:
  Kind kind_;
  std::string placeholder_;
};

// The special placeholder marking where the image segment goes.
inline constexpr std::string_view kImagePlaceholder = "image";

// A text template with `{name}` placeholders (name = [a-z_]+). Braces that
// do not form such a token are literal. The placeholder set is checked
// against the required set when the template is constructed.
class PromptTemplate {
 public:
  PromptTemplate(std::string name, std::string body, std::set<std::string> required);

  const std::string& name() const noexcept { return name_; }
  const std::string& body() const noexcept { return body_; }
  const std::set<std::string>& required() const noexcept { return required_; }
  bool wants_image() const noexcept { return required_.contains(std::string(kImagePlaceholder)); }

  // Single-pass substitution: bound values are never re-expanded. The image
  // placeholder becomes an image segment carrying image_ref.
  std::vector<Segment> render_segments(const Bindings& bindings, const std::optional<std::string>& image_ref) const;

  // Text-only rendering for templates without an image placeholder.
  std::string render_text(const Bindings& bindings) const;

 private:
  struct Piece {
    bool is_placeholder;
    std::string value;
  };

  void check_bindings(const Bindings& bindings, const std::optional<std::string>& image_ref) const;

  std::string name_;
  std::string body_;
  std::set<std::string> required_;
  std::vector<Piece> pieces_;
};

// Placeholder names found in a template body, in order of appearance.
std::vector<std::string> scan_placeholders(std::string_view body);

enum class Stage { initial, critique, revise, decide, collect_feedback };

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);
const std::set<std::string>& required_placeholders(Stage s);

struct StageTemplate {
  Stage stage;
  PromptTemplate tmpl;

  static StageTemplate load(Stage stage, std::string body);
};

// Renders a stage template into a one-message user request labelled with
// the stage name.
GenerationRequest render(const StageTemplate& t, const Bindings& bindings, const std::optional<std::string>& image_ref,
                         const DecodeOptions& decode = {},
                         std::chrono::milliseconds timeout = std::chrono::milliseconds{60000});

// Judge templates used by the evaluation harness.
enum class JudgeKind { mmhal, gavie };
const std::set<std::string>& required_placeholders(JudgeKind k);

// All prompt templates. Defaults are the files shipped in templates/; a
// directory passed to load_dir overrides whichever `<stage>.txt` files it
// contains. Placeholder mismatches fail here, not at render time.
class TemplateSet {
 public:
  static TemplateSet defaults();
  static TemplateSet load_dir(const std::filesystem::path& dir);

  const StageTemplate& stage(Stage s) const;
  const PromptTemplate& judge(JudgeKind k) const;

  void set(StageTemplate t);
  void set_judge(JudgeKind k, PromptTemplate t);

 private:
  std::map<Stage, StageTemplate> stages_;
  std::map<JudgeKind, PromptTemplate> judges_;
};

// Raw text of a shipped default template ("initial", ..., "mmhal_judge").
std::string_view default_template_body(std::string_view name);

}  // namespace refine
