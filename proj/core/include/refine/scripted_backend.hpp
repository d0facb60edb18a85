#pragma once

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "refine/backend.hpp"

namespace refine {

// A scripted reply is either text or an injected error.
struct ScriptedReply {
  std::string text;
  std::optional<BackendErrorKind> error;

  static ScriptedReply ok(std::string t) { return {std::move(t), std::nullopt}; }
  static ScriptedReply fail(BackendErrorKind k) { return {{}, k}; }
};

// Deterministic backend that pops replies in call order. Replies queued
// under a stage label are served to requests with that label first; other
// requests draw from the shared queue.
//
// Order-dependent: use from a single consumer only.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::vector<ScriptedReply> replies,
                           std::map<std::string, std::vector<ScriptedReply>> per_stage = {});
  explicit ScriptedBackend(const std::vector<std::string>& replies);
  // Not safe against a concurrent generate() on `other`.
  ScriptedBackend(ScriptedBackend&& other) noexcept
      : shared_(std::move(other.shared_)), per_stage_(std::move(other.per_stage_)) {}

  // {"replies": [...], "stages": {"critique": [...]}}; an entry is a string
  // or {"error": "Timeout"}.
  static ScriptedBackend from_json(const json& j);
  static ScriptedBackend from_file(const std::string& path);

  GenerationResult generate(const GenerationRequest& req) override;
  std::string name() const override { return "scripted"; }

  std::size_t remaining() const;

 private:
  mutable std::mutex mu_;
  std::deque<ScriptedReply> shared_;
  std::map<std::string, std::deque<ScriptedReply>> per_stage_;
};

// Backend computed by a pure function of the request; safe for concurrent
// use when the function is.
class CallbackBackend : public Backend {
 public:
  using Fn = std::function<std::string(const GenerationRequest&)>;

  explicit CallbackBackend(Fn fn, std::string name = "callback") : fn_(std::move(fn)), name_(std::move(name)) {}

  GenerationResult generate(const GenerationRequest& req) override;
  std::string name() const override { return name_; }

 private:
  Fn fn_;
  std::string name_;
};

}  // namespace refine
