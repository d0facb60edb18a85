#include "refine/engine.hpp"

#include <cctype>

#include "refine/parallel.hpp"

namespace refine {

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_word_byte(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// "response x" not followed by another word character.
bool mentions(const std::string& lower, std::string_view needle) {
  for (auto pos = lower.find(needle); pos != std::string::npos; pos = lower.find(needle, pos + 1)) {
    const auto end = pos + needle.size();
    const bool left_ok = pos == 0 || !is_word_byte(lower[pos - 1]);
    const bool right_ok = end == lower.size() || !is_word_byte(lower[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n\v\f");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n\v\f");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::uint64_t query_seed(std::uint64_t run_seed, std::string_view query_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : query_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return RngStream(run_seed ^ h).next();
}

JudgeChoice parse_decision(std::string_view judge_text) {
  const std::string bare = ascii_lower(trim(judge_text));
  if (bare == "a" || bare == "a.") return JudgeChoice::a;
  if (bare == "b" || bare == "b.") return JudgeChoice::b;
  const bool a = mentions(bare, "response a");
  const bool b = mentions(bare, "response b");
  if (a == b) return JudgeChoice::unparseable;
  return a ? JudgeChoice::a : JudgeChoice::b;
}

Choice resolve_choice(JudgeChoice judged, PresentedOrder order) {
  if (judged == JudgeChoice::unparseable) return Choice::keep_best;
  const bool picked_first = judged == JudgeChoice::a;
  const bool best_is_first = order == PresentedOrder::best_first;
  return picked_first == best_is_first ? Choice::keep_best : Choice::accept_revised;
}

RevisionEngine::RevisionEngine(Backend& backend, EngineConfig cfg, TemplateSet templates)
    : backend_(backend), cfg_(std::move(cfg)), templates_(std::move(templates)) {
  cfg_.validate();
}

StageOutput RevisionEngine::call(Stage stage, const VisualQuery& q, const Bindings& bindings,
                                 std::uint32_t iteration, std::vector<StageTiming>* timings) const {
  const auto req = render(templates_.stage(stage), bindings, q.image_ref, cfg_.decode, timeout_);
  GenerationResult result;
  try {
    result = backend_.generate(req);
  } catch (const BackendError& e) {
    throw e.annotated(std::string(to_string(stage)), iteration);
  }
  if (timings) timings->push_back({std::string(to_string(stage)), iteration, result.latency_ms});
  return {trim_trailing(result.text), result.latency_ms};
}

Response RevisionEngine::initial(const VisualQuery& q, std::vector<StageTiming>* timings) const {
  auto out = call(Stage::initial, q, {{"question", q.question}}, 0, timings);
  if (out.text.empty()) throw StageError("initial", 0, "backend returned empty text");
  return Response{std::move(out.text), ResponseStage::initial, 0};
}

Feedback RevisionEngine::critique(const VisualQuery& q, const Response& best, std::uint32_t iteration,
                                  std::vector<StageTiming>* timings) const {
  auto out = call(Stage::critique, q, {{"question", q.question}, {"best_response", best.text}}, iteration, timings);
  if (out.text.empty()) throw StageError("critique", iteration, "backend returned empty feedback");
  return Feedback{std::move(out.text), iteration};
}

Response RevisionEngine::revise(const VisualQuery& q, const Response& best, const Feedback& feedback,
                                std::vector<StageTiming>* timings) const {
  auto out = call(Stage::revise, q,
                  {{"question", q.question}, {"best_response", best.text}, {"feedback", feedback.text}},
                  feedback.iteration, timings);
  if (out.text.empty()) throw StageError("revise", feedback.iteration, "backend returned empty revision");
  return Response{std::move(out.text), ResponseStage::revised, feedback.iteration};
}

Decision RevisionEngine::decide(const VisualQuery& q, const Response& best, const Response& revised, RngStream& rng,
                                std::vector<StageTiming>* timings) const {
  const auto order = rng.coin() ? PresentedOrder::revised_first : PresentedOrder::best_first;
  const bool best_first = order == PresentedOrder::best_first;
  const Bindings bindings = {{"question", q.question},
                             {"candidate_a", best_first ? best.text : revised.text},
                             {"candidate_b", best_first ? revised.text : best.text}};
  auto out = call(Stage::decide, q, bindings, revised.iteration, timings);
  const auto judged = parse_decision(out.text);
  return Decision{resolve_choice(judged, order), std::move(out.text), order, judged == JudgeChoice::unparseable};
}

RevisionTranscript RevisionEngine::run(const VisualQuery& query) const {
  query.validate();
  RevisionTranscript t;
  t.query_id = query.id;

  Response best = initial(query, &t.timings);

  switch (cfg_.mode) {
    case EngineMode::prediction_only:
      t.stop_reason = StopReason::mode_short_circuit;
      break;

    case EngineMode::no_decision: {
      auto fb = critique(query, best, 1, &t.timings);
      auto rev = revise(query, best, fb, &t.timings);
      t.iterations.push_back({std::move(fb), rev, std::nullopt});
      best = std::move(rev);
      t.stop_reason = StopReason::mode_short_circuit;
      break;
    }

    case EngineMode::full: {
      RngStream rng(query_seed(cfg_.rng_seed, query.id));
      t.stop_reason = StopReason::max_iterations;
      for (std::uint32_t i = 1; i <= cfg_.max_iterations; ++i) {
        auto fb = critique(query, best, i, &t.timings);
        auto rev = revise(query, best, fb, &t.timings);
        auto dec = decide(query, best, rev, rng, &t.timings);
        const bool keep = dec.chosen == Choice::keep_best;
        t.iterations.push_back({std::move(fb), rev, std::move(dec)});
        if (keep) {
          t.stop_reason = StopReason::decision_kept_best;
          break;
        }
        best = std::move(rev);
      }
      break;
    }
  }

  t.final = std::move(best);
  return t;
}

RevisionTranscript run_revision(Backend& backend, const VisualQuery& query, const EngineConfig& cfg) {
  return RevisionEngine(backend, cfg).run(query);
}

std::vector<RevisionTranscript> run_batch(const RevisionEngine& engine, std::span<const VisualQuery> queries,
                                          std::size_t parallelism) {
  std::vector<RevisionTranscript> out(queries.size());
  parallel_for(queries.size(), parallelism, [&](std::size_t i) { out[i] = engine.run(queries[i]); });
  return out;
}

}  // namespace refine
