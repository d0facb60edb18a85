#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "refine/backend.hpp"
#include "refine/templates.hpp"
#include "refine/types.hpp"

namespace refine {

// splitmix64. Same seed gives the same sequence on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Fair coin from the top bit.
  bool coin() noexcept { return (next() >> 63) != 0; }

  std::uint64_t seed_state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

// Per-query stream seed: run seed mixed with a hash of the query id, so
// concurrent chains are independent of scheduling.
std::uint64_t query_seed(std::uint64_t run_seed, std::string_view query_id);

enum class JudgeChoice { a, b, unparseable };

// Case-insensitive "response a" / "response b" match; a bare "A"/"A." or
// "B"/"B." reply also counts. Both or neither -> unparseable.
JudgeChoice parse_decision(std::string_view judge_text);

// Maps the judge's positional choice back through the presentation order.
// Unparseable maps to keep_best.
Choice resolve_choice(JudgeChoice judged, PresentedOrder order);

// Engine-side failure of a stage that the backend completed.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, std::uint32_t iteration, const std::string& what)
      : std::runtime_error("EmptyStageOutput in stage '" + stage + "' (iteration " + std::to_string(iteration) +
                           "): " + what),
        stage_(std::move(stage)),
        iteration_(iteration) {}

  const std::string& stage() const noexcept { return stage_; }
  std::uint32_t iteration() const noexcept { return iteration_; }

 private:
  std::string stage_;
  std::uint32_t iteration_;
};

struct StageOutput {
  std::string text;
  double latency_ms = 0.0;
};

// Runs the critique -> revise -> decide loop against one backend. Stage
// methods are public so ablations and tests can drive them directly.
class RevisionEngine {
 public:
  RevisionEngine(Backend& backend, EngineConfig cfg, TemplateSet templates = TemplateSet::defaults());

  RevisionTranscript run(const VisualQuery& query) const;

  Response initial(const VisualQuery& q, std::vector<StageTiming>* timings = nullptr) const;
  Feedback critique(const VisualQuery& q, const Response& best, std::uint32_t iteration,
                    std::vector<StageTiming>* timings = nullptr) const;
  Response revise(const VisualQuery& q, const Response& best, const Feedback& feedback,
                  std::vector<StageTiming>* timings = nullptr) const;
  Decision decide(const VisualQuery& q, const Response& best, const Response& revised, RngStream& rng,
                  std::vector<StageTiming>* timings = nullptr) const;

  const EngineConfig& config() const noexcept { return cfg_; }
  void set_timeout(std::chrono::milliseconds t) noexcept { timeout_ = t; }

 private:
  StageOutput call(Stage stage, const VisualQuery& q, const Bindings& bindings, std::uint32_t iteration,
                   std::vector<StageTiming>* timings) const;

  Backend& backend_;
  EngineConfig cfg_;
  TemplateSet templates_;
  std::chrono::milliseconds timeout_{60000};
};

RevisionTranscript run_revision(Backend& backend, const VisualQuery& query, const EngineConfig& cfg);

// Runs independent chains with at most `parallelism` in flight. Results are
// in input order.
std::vector<RevisionTranscript> run_batch(const RevisionEngine& engine, std::span<const VisualQuery> queries,
                                          std::size_t parallelism);

}  // namespace refine
