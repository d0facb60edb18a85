#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace refine {

using json = nlohmann::json;

// Thrown when a value violates a documented invariant of its type.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct VisualQuery {
  std::string id;
  std::string image_ref;  // file path, http(s) URL or data: URL
  std::string question;

  void validate() const;
  bool operator==(const VisualQuery&) const = default;
};

enum class ResponseStage { initial, revised };

struct Response {
  std::string text;
  ResponseStage stage = ResponseStage::initial;
  std::uint32_t iteration = 0;

  void validate() const;
  bool operator==(const Response&) const = default;
};

struct Feedback {
  std::string text;
  std::uint32_t iteration = 1;

  void validate() const;
  bool operator==(const Feedback&) const = default;
};

enum class Choice { keep_best, accept_revised };
enum class PresentedOrder { best_first, revised_first };

struct Decision {
  Choice chosen = Choice::keep_best;
  std::string raw_judge_text;
  PresentedOrder presented_order = PresentedOrder::best_first;
  // Judge text matched neither candidate; chosen falls back to keep_best.
  bool unparseable = false;

  bool operator==(const Decision&) const = default;
};

// One critique -> revise -> decide pass. The decision is absent in
// no_decision mode.
struct IterationRecord {
  Feedback feedback;
  Response revised;
  std::optional<Decision> decision;

  bool operator==(const IterationRecord&) const = default;
};

enum class StopReason { decision_kept_best, max_iterations, mode_short_circuit };

struct StageTiming {
  std::string stage;
  std::uint32_t iteration = 0;
  double ms = 0.0;

  bool operator==(const StageTiming&) const = default;
};

struct RevisionTranscript {
  std::string query_id;
  std::vector<IterationRecord> iterations;
  Response final;
  StopReason stop_reason = StopReason::mode_short_circuit;
  std::vector<StageTiming> timings;

  // max_iterations of 0 skips the length check.
  void validate(std::uint32_t max_iterations = 0) const;
  bool operator==(const RevisionTranscript&) const = default;
};

enum class EngineMode { full, prediction_only, no_decision };

struct DecodeOptions {
  bool greedy = true;
  std::uint32_t max_tokens = 512;

  bool operator==(const DecodeOptions&) const = default;
};

struct EngineConfig {
  std::uint32_t max_iterations = 3;
  EngineMode mode = EngineMode::full;
  std::uint64_t rng_seed = 0;
  DecodeOptions decode;

  void validate() const;
  bool operator==(const EngineConfig&) const = default;
};

std::string_view to_string(ResponseStage s);
std::string_view to_string(Choice c);
std::string_view to_string(PresentedOrder o);
std::string_view to_string(StopReason r);
std::string_view to_string(EngineMode m);
EngineMode parse_engine_mode(std::string_view s);

void to_json(json& j, const VisualQuery& v);
void from_json(const json& j, VisualQuery& v);
void to_json(json& j, const Response& v);
void from_json(const json& j, Response& v);
void to_json(json& j, const Feedback& v);
void from_json(const json& j, Feedback& v);
void to_json(json& j, const Decision& v);
void from_json(const json& j, Decision& v);
void to_json(json& j, const IterationRecord& v);
void from_json(const json& j, IterationRecord& v);
void to_json(json& j, const StageTiming& v);
void from_json(const json& j, StageTiming& v);
void to_json(json& j, const RevisionTranscript& v);
void from_json(const json& j, RevisionTranscript& v);
void to_json(json& j, const DecodeOptions& v);
void from_json(const json& j, DecodeOptions& v);
void to_json(json& j, const EngineConfig& v);
void from_json(const json& j, EngineConfig& v);

// Single-line canonical JSON: sorted keys, no insignificant whitespace.
std::string serialize_transcript(const RevisionTranscript& t);
RevisionTranscript deserialize_transcript(std::string_view line);

// Reads a JSONL file of queries; blank lines are skipped. Throws
// ValidationError on duplicate ids.
std::vector<VisualQuery> read_queries_jsonl(const std::string& path);

// Strips trailing whitespace (space, tab, CR, LF, VT, FF) only.
std::string trim_trailing(std::string_view s);

}  // namespace refine
