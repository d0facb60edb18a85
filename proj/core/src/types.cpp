#include "refine/types.hpp"

#include <fstream>
#include <set>

namespace refine {

namespace {

template <class Enum, std::size_t N>
Enum enum_from(std::string_view text, const std::pair<Enum, std::string_view> (&table)[N],
               const char* what) {
  for (const auto& [value, name] : table) {
    if (name == text) return value;
  }
  throw ValidationError(std::string("unknown ") + what + ": '" + std::string(text) + "'");
}

template <class Enum, std::size_t N>
std::string_view enum_name(Enum e, const std::pair<Enum, std::string_view> (&table)[N]) {
  for (const auto& [value, name] : table) {
    if (value == e) return name;
  }
  return "?";
}

constexpr std::pair<ResponseStage, std::string_view> kResponseStages[] = {
    {ResponseStage::initial, "initial"}, {ResponseStage::revised, "revised"}};
constexpr std::pair<Choice, std::string_view> kChoices[] = {
    {Choice::keep_best, "keep_best"}, {Choice::accept_revised, "accept_revised"}};
constexpr std::pair<PresentedOrder, std::string_view> kOrders[] = {
    {PresentedOrder::best_first, "best_first"}, {PresentedOrder::revised_first, "revised_first"}};
constexpr std::pair<StopReason, std::string_view> kStopReasons[] = {
    {StopReason::decision_kept_best, "decision_kept_best"},
    {StopReason::max_iterations, "max_iterations"},
    {StopReason::mode_short_circuit, "mode_short_circuit"}};
constexpr std::pair<EngineMode, std::string_view> kModes[] = {
    {EngineMode::full, "full"},
    {EngineMode::prediction_only, "prediction_only"},
    {EngineMode::no_decision, "no_decision"}};

}  // namespace

std::string_view to_string(ResponseStage s) { return enum_name(s, kResponseStages); }
std::string_view to_string(Choice c) { return enum_name(c, kChoices); }
std::string_view to_string(PresentedOrder o) { return enum_name(o, kOrders); }
std::string_view to_string(StopReason r) { return enum_name(r, kStopReasons); }
std::string_view to_string(EngineMode m) { return enum_name(m, kModes); }

EngineMode parse_engine_mode(std::string_view s) {
  // CLI spelling uses dashes.
  std::string normalized(s);
  for (auto& ch : normalized) {
    if (ch == '-') ch = '_';
  }
  return enum_from(normalized, kModes, "engine mode");
}

void VisualQuery::validate() const {
  if (id.empty()) throw ValidationError("VisualQuery.id must be non-empty");
  if (question.empty()) throw ValidationError("VisualQuery '" + id + "': question must be non-empty");
}

void Response::validate() const {
  if ((iteration == 0) != (stage == ResponseStage::initial)) {
    throw ValidationError("Response: iteration == 0 iff stage == initial");
  }
}

void Feedback::validate() const {
  if (text.empty()) throw ValidationError("Feedback.text must be non-empty");
  if (iteration == 0) throw ValidationError("Feedback.iteration must be positive");
}

void RevisionTranscript::validate(std::uint32_t max_iterations) const {
  final.validate();
  if (max_iterations != 0 && iterations.size() > max_iterations) {
    throw ValidationError("RevisionTranscript '" + query_id + "': more iterations than max_iterations");
  }
  for (const auto& it : iterations) {
    it.feedback.validate();
    it.revised.validate();
  }
  if (stop_reason == StopReason::decision_kept_best) {
    if (iterations.empty() || !iterations.back().decision ||
        iterations.back().decision->chosen != Choice::keep_best) {
      throw ValidationError("RevisionTranscript '" + query_id +
                            "': decision_kept_best requires a final keep_best decision");
    }
  }
}

void EngineConfig::validate() const {
  if (max_iterations < 1) throw ValidationError("EngineConfig.max_iterations must be >= 1");
  if (decode.max_tokens < 1) throw ValidationError("DecodeOptions.max_tokens must be >= 1");
}

void to_json(json& j, const VisualQuery& v) {
  j = json{{"id", v.id}, {"image", v.image_ref}, {"question", v.question}};
}

void from_json(const json& j, VisualQuery& v) {
  v.id = j.at("id").get<std::string>();
  // Accept both the short and the long key for the image locator.
  if (j.contains("image")) {
    v.image_ref = j.at("image").get<std::string>();
  } else {
    v.image_ref = j.value("image_ref", std::string{});
  }
  v.question = j.at("question").get<std::string>();
}

void to_json(json& j, const Response& v) {
  j = json{{"text", v.text}, {"stage", to_string(v.stage)}, {"iteration", v.iteration}};
}

void from_json(const json& j, Response& v) {
  v.text = j.at("text").get<std::string>();
  v.stage = enum_from(j.at("stage").get<std::string>(), kResponseStages, "response stage");
  v.iteration = j.at("iteration").get<std::uint32_t>();
}

void to_json(json& j, const Feedback& v) { j = json{{"text", v.text}, {"iteration", v.iteration}}; }

void from_json(const json& j, Feedback& v) {
  v.text = j.at("text").get<std::string>();
  v.iteration = j.at("iteration").get<std::uint32_t>();
}

void to_json(json& j, const Decision& v) {
  j = json{{"chosen", to_string(v.chosen)},
           {"raw_judge_text", v.raw_judge_text},
           {"presented_order", to_string(v.presented_order)},
           {"unparseable", v.unparseable}};
}

void from_json(const json& j, Decision& v) {
  v.chosen = enum_from(j.at("chosen").get<std::string>(), kChoices, "decision");
  v.raw_judge_text = j.at("raw_judge_text").get<std::string>();
  v.presented_order = enum_from(j.at("presented_order").get<std::string>(), kOrders, "presented order");
  v.unparseable = j.value("unparseable", false);
}

void to_json(json& j, const IterationRecord& v) {
  j = json{{"feedback", v.feedback}, {"revised", v.revised}};
  j["decision"] = v.decision ? json(*v.decision) : json(nullptr);
}

void from_json(const json& j, IterationRecord& v) {
  v.feedback = j.at("feedback").get<Feedback>();
  v.revised = j.at("revised").get<Response>();
  if (j.contains("decision") && !j.at("decision").is_null()) {
    v.decision = j.at("decision").get<Decision>();
  } else {
    v.decision.reset();
  }
}

void to_json(json& j, const StageTiming& v) {
  j = json{{"stage", v.stage}, {"iteration", v.iteration}, {"ms", v.ms}};
}

void from_json(const json& j, StageTiming& v) {
  v.stage = j.at("stage").get<std::string>();
  v.iteration = j.at("iteration").get<std::uint32_t>();
  v.ms = j.at("ms").get<double>();
}

void to_json(json& j, const RevisionTranscript& v) {
  j = json{{"query_id", v.query_id},
           {"iterations", v.iterations},
           {"final", v.final},
           {"stop_reason", to_string(v.stop_reason)},
           {"timings", v.timings}};
}

void from_json(const json& j, RevisionTranscript& v) {
  v.query_id = j.at("query_id").get<std::string>();
  v.iterations = j.at("iterations").get<std::vector<IterationRecord>>();
  v.final = j.at("final").get<Response>();
  v.stop_reason = enum_from(j.at("stop_reason").get<std::string>(), kStopReasons, "stop reason");
  v.timings = j.value("timings", std::vector<StageTiming>{});
}

void to_json(json& j, const DecodeOptions& v) {
  j = json{{"greedy", v.greedy}, {"max_tokens", v.max_tokens}};
}

void from_json(const json& j, DecodeOptions& v) {
  v.greedy = j.value("greedy", true);
  v.max_tokens = j.value("max_tokens", std::uint32_t{512});
}

void to_json(json& j, const EngineConfig& v) {
  j = json{{"max_iterations", v.max_iterations},
           {"mode", to_string(v.mode)},
           {"rng_seed", v.rng_seed},
           {"decode", v.decode}};
}

void from_json(const json& j, EngineConfig& v) {
  v.max_iterations = j.value("max_iterations", std::uint32_t{3});
  v.mode = parse_engine_mode(j.value("mode", std::string("full")));
  v.rng_seed = j.value("rng_seed", std::uint64_t{0});
  v.decode = j.value("decode", DecodeOptions{});
}

std::string serialize_transcript(const RevisionTranscript& t) {
  // nlohmann::json objects are std::map backed, so keys come out sorted.
  return json(t).dump(-1, ' ', false, json::error_handler_t::replace);
}

RevisionTranscript deserialize_transcript(std::string_view line) {
  return json::parse(line).get<RevisionTranscript>();
}

std::vector<VisualQuery> read_queries_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open queries file: " + path);
  std::vector<VisualQuery> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto q = json::parse(line).get<VisualQuery>();
    q.validate();
    if (!seen.insert(q.id).second) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": duplicate query id '" + q.id + "'");
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::string trim_trailing(std::string_view s) {
  auto end = s.find_last_not_of(" \t\r\n\v\f");
  if (end == std::string_view::npos) return {};
  return std::string(s.substr(0, end + 1));
}

}  // namespace refine
